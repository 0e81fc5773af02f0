"""Site adjacency graph, all-pairs path distances, and the fold metric.

Two sites are adjacent when their regions share a voxel face inside one
component; the edge weight is the Euclidean distance between the site points,
so shortest paths through the graph approximate geodesic distances between
sites. The fold metric is the ratio of straight-line to path distance: values
near 1 mean the surface between two sites runs straight, values near 0 mean
it folds back on itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .grid import NONE_ID
from .tessellation import Tessellation


@dataclass
class SiteGraph:
    n_sites: int
    edges: np.ndarray  # (E, 2) site id pairs, i < j
    weights: np.ndarray  # (E,) Euclidean site-to-site distances
    site_components: np.ndarray  # (n_sites,)
    positions: np.ndarray  # (n_sites, 3)

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "edges": self.edges.tolist(),
            "weights": self.weights.tolist(),
        }


@dataclass
class FoldMetric:
    matrix: np.ndarray  # (n, n); 0 diagonal, c for disconnected pairs
    c: float
    site_components: np.ndarray = field(default=None)


def region_adjacency(tess: Tessellation) -> SiteGraph:
    """Edges between sites whose regions share a voxel face within one
    component."""
    nx, ny, nz = tess.dims
    site3d = tess.site_of.reshape(nz, ny, nx)
    comp3d = tess.component.reshape(nz, ny, nx)
    pairs = []
    for axis in range(3):
        if site3d.shape[axis] < 2:
            continue
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[axis] = slice(None, -1)
        hi[axis] = slice(1, None)
        a = site3d[tuple(lo)].ravel()
        b = site3d[tuple(hi)].ravel()
        ca = comp3d[tuple(lo)].ravel()
        cb = comp3d[tuple(hi)].ravel()
        ok = (a != b) & (a != NONE_ID) & (b != NONE_ID) & (ca == cb)
        if np.any(ok):
            pairs.append(np.stack([a[ok], b[ok]], axis=1))
    n = tess.n_sites
    if pairs:
        e = np.concatenate(pairs)
        e = np.sort(e, axis=1)
        e = np.unique(e, axis=0)
    else:
        e = np.empty((0, 2), dtype=np.int64)
    pos = tess.site_positions()
    w = np.linalg.norm(pos[e[:, 0]] - pos[e[:, 1]], axis=1) if e.size else np.empty(0)
    return SiteGraph(
        n_sites=n,
        edges=e.astype(np.int64),
        weights=w,
        site_components=tess.site_components(),
        positions=pos,
    )


def all_pairs_paths(graph: SiteGraph) -> np.ndarray:
    """Exact shortest-path distance matrix; infinity across components.

    Dijkstra per source, run component by component (the graph never links
    components, so each block of the matrix is independent).
    """
    n = graph.n_sites
    out = np.full((n, n), np.inf)
    np.fill_diagonal(out, 0.0)
    if n == 0:
        return out
    sparse = csr_matrix(
        (graph.weights, (graph.edges[:, 0], graph.edges[:, 1])), shape=(n, n)
    )
    comps = graph.site_components
    for c in np.unique(comps):
        members = np.nonzero(comps == c)[0]
        if members.size == 1:
            continue
        sub = sparse[members][:, members]
        d = dijkstra(sub, directed=False)
        out[np.ix_(members, members)] = d
    return out


def fold_metric(
    positions: np.ndarray, path_dists: np.ndarray, c: float = 1.0
) -> FoldMetric:
    """Euclidean-to-path-distance ratio per site pair; c where no path exists.

    Connected pairs land in (0, 1] (a path can never be shorter than the
    straight line); the diagonal is 0.
    """
    if c < 1.0:
        raise ValueError("c must be >= 1")
    positions = np.asarray(positions, dtype=np.float64)
    n = positions.shape[0]
    diff = positions[:, None, :] - positions[None, :, :]
    euclid = np.linalg.norm(diff, axis=2)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(np.isfinite(path_dists) & (path_dists > 0),
                         euclid / path_dists, c)
    np.fill_diagonal(ratio, 0.0)
    return FoldMetric(matrix=ratio, c=c)
