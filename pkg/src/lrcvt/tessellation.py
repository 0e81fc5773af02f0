"""Restricted geodesic Voronoi classification and the centroidal Lloyd loop.

Classification grows regions out of the sites in two phases. Phase 1 admits
only direct line-of-sight connections to a site, so every classified voxel can
see its site. Phase 2 turns every classified voxel into a path node: a voxel
may extend a neighbor's path, or shortcut straight to a neighbor's path node
(ray-checked against the component boundary). Rounds relax until no voxel can
shorten its path; distances are polyline lengths through the discovered nodes.

The site update pulls each site toward the weighted centroid of its region,
with the mass of every hidden voxel applied at its first line-of-sight
ancestor, and clamps the move at the component boundary.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from . import _kernels as K
from .grid import NONE_ID, LabelMap, VoxelGrid
from .seeding import SeedingParams, Site, seed_sites, voxel_weights

# per-voxel state bits
LOS = 1
ACTIVE = 2
NODE = 4


@dataclass
class LloydParams:
    max_updates: int = 50
    ds_tolerance: float = 0.25  # mean site displacement, voxel lengths

    def __post_init__(self):
        if self.max_updates < 1:
            raise ValueError("max_updates must be >= 1")
        if self.ds_tolerance <= 0:
            raise ValueError("ds_tolerance must be > 0")


@dataclass
class Tessellation:
    """Classification result: per-voxel site assignment, geodesic distance,
    path predecessor (src), and state flags, plus the site list."""

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    site_of: np.ndarray  # int32, NONE_ID where unassigned
    dist: np.ndarray  # float64, inf where unassigned
    src: np.ndarray  # int32 predecessor voxel; src[v] == v marks line of sight
    state: np.ndarray  # uint8 bit field: LOS | ACTIVE | NODE
    component: np.ndarray  # per-voxel component id (shared with the LabelMap)
    sites: list[Site]
    report: dict = field(default_factory=dict)
    weights: np.ndarray | None = None

    @property
    def n_sites(self) -> int:
        return len(self.sites)

    def site_positions(self) -> np.ndarray:
        return np.array([s.position for s in self.sites], dtype=np.float64).reshape(
            -1, 3
        )

    def site_components(self) -> np.ndarray:
        return np.array([s.component_id for s in self.sites], dtype=np.int32)


def voxel_length(dims, spacing) -> float:
    """Unit voxel length: mean spacing over the axes that actually extend."""
    active = [s for d, s in zip(dims, spacing) if d > 1]
    if not active:
        active = list(spacing)
    return float(np.mean(active))


def raycast_same_component(
    labels: LabelMap, a, b, spacing=(1.0, 1.0, 1.0)
) -> bool:
    """True iff every voxel traversed by the segment a->b (endpoints included)
    shares the component id of a's voxel."""
    nx, ny, nz = labels.dims
    sx, sy, sz = spacing
    ax, ay, az = float(a[0]), float(a[1]), float(a[2])
    cx = min(max(int(np.floor(ax / sx)), 0), nx - 1)
    cy = min(max(int(np.floor(ay / sy)), 0), ny - 1)
    cz = min(max(int(np.floor(az / sz)), 0), nz - 1)
    want = labels.component[cx + nx * (cy + ny * cz)]
    return bool(
        K._segment_clear(
            labels.component, nx, ny, nz, sx, sy, sz,
            ax, ay, az, float(b[0]), float(b[1]), float(b[2]), int(want),
        )
    )


def voronoi_classify(
    grid: VoxelGrid,
    labels: LabelMap,
    sites: list[Site],
    weights: np.ndarray | None = None,
) -> Tessellation:
    """Classify every reachable in-band voxel to its geodesically nearest site.

    Components that contain no site are skipped and listed in the report.
    Ties in nearest-site selection resolve toward the lower site id.
    """
    nx, ny, nz = grid.dims
    sx, sy, sz = grid.spacing
    n = grid.size
    comp = np.ascontiguousarray(labels.component, dtype=np.int32)
    site_pos = np.array([s.position for s in sites], dtype=np.float64).reshape(-1, 3)
    site_comp = np.array([s.component_id for s in sites], dtype=np.int32)

    site_of = np.full(n, NONE_ID, dtype=np.int32)
    dist = np.full(n, np.inf, dtype=np.float64)
    src = np.full(n, NONE_ID, dtype=np.int32)
    offsets = K.OFFSETS

    report: dict = {"rounds": 0, "sweeps": 0}
    if len(sites) == 0:
        state = np.zeros(n, dtype=np.uint8)
        report["components_without_sites"] = sorted(
            {c.id for c in labels.component_table}
        )
        return Tessellation(
            grid.dims, grid.spacing, site_of, dist, src, state, comp,
            list(sites), report, weights,
        )

    bad = K._place_seeds(
        site_pos, site_comp, comp, nx, ny, nz, sx, sy, sz, site_of, dist, src
    )
    if bad:
        raise ValueError(f"{bad} sites sit outside their recorded component")

    # scratch buffers shared by all rounds
    wl = np.empty(n, dtype=np.int64)
    wl_next = np.empty(n, dtype=np.int64)
    stamp = np.full(n, -1, dtype=np.int64)
    imp_stamp = np.full(n, -1, dtype=np.int64)
    p_dist = np.empty(n, dtype=np.float64)
    p_site = np.empty(n, dtype=np.int32)
    p_src = np.empty(n, dtype=np.int32)

    n_wl = K._seed_worklist(comp, offsets, nx, ny, nz, site_of, stamp, wl)
    rounds1, rnd = K._run_phase(
        False, comp, offsets, nx, ny, nz, sx, sy, sz, site_pos,
        site_of, dist, src, wl, n_wl, wl_next, stamp, imp_stamp,
        p_dist, p_site, p_src, 0,
    )

    # phase 2: all classified voxels become path nodes; relax to fixpoint.
    # Shortcut candidates read non-adjacent node state, so worklist rounds are
    # re-verified with full sweeps until one finds no improvement.
    comps_with_sites = np.zeros(max(labels.n_components, 1), dtype=np.bool_)
    comps_with_sites[site_comp] = True
    in_band = np.nonzero(comp != NONE_ID)[0]
    eligible = in_band[comps_with_sites[comp[in_band]]].astype(np.int64)

    wl[: eligible.size] = eligible
    n_wl = eligible.size
    rounds2 = 0
    sweeps = 0
    while True:
        r, rnd = K._run_phase(
            True, comp, offsets, nx, ny, nz, sx, sy, sz, site_pos,
            site_of, dist, src, wl, n_wl, wl_next, stamp, imp_stamp,
            p_dist, p_site, p_src, rnd,
        )
        rounds2 += r
        rnd += 1
        sweeps += 1
        K._eval_list(
            eligible, eligible.size, True, comp, offsets, nx, ny, nz, sx, sy, sz,
            site_pos, site_of, dist, src, p_dist, p_site, p_src, imp_stamp, rnd,
        )
        improved = int(np.count_nonzero(imp_stamp[eligible] == rnd))
        if improved == 0:
            break
        n_wl = K._apply_and_enqueue(
            eligible, eligible.size, comp, offsets, nx, ny, nz,
            site_of, dist, src, p_dist, p_site, p_src, imp_stamp, stamp, wl, rnd,
        )

    state = np.zeros(n, dtype=np.uint8)
    assigned = site_of != NONE_ID
    state[assigned] |= ACTIVE | NODE
    state[assigned & (src == np.arange(n))] |= LOS

    no_site = sorted(
        int(c.id) for c in labels.component_table if not comps_with_sites[c.id]
    )
    report.update(
        rounds=int(rounds1 + rounds2),
        sweeps=int(sweeps),
        components_without_sites=no_site,
        assigned=int(np.count_nonzero(assigned)),
    )
    return Tessellation(
        grid.dims, grid.spacing, site_of, dist, src, state, comp,
        list(sites), report, weights,
    )


def centroidal_update(
    tess: Tessellation,
    weights: np.ndarray | None = None,
) -> tuple[list[Site], float]:
    """One geodesically weighted site move.

    Each voxel votes at its first line-of-sight ancestor; the site moves along
    the segment to the weighted vote centroid, stopping half a voxel length
    short of the component boundary. Returns the new sites and the mean site
    displacement in voxel lengths.
    """
    nx, ny, nz = tess.dims
    sx, sy, sz = tess.spacing
    if weights is None:
        weights = tess.weights
    if weights is None:
        weights = np.ones(tess.site_of.size)
    weights = np.ascontiguousarray(weights, dtype=np.float64)

    comp = tess.component
    site_pos = tess.site_positions()
    site_comp = tess.site_components()
    phi, _ = K._phi_chains(tess.site_of, tess.src)
    wsum, tx, ty, tz = K._centroid_targets(
        comp, nx, ny, sx, sy, sz, tess.site_of, phi, weights, len(tess.sites)
    )
    vlen = voxel_length(tess.dims, tess.spacing)
    new_pos, disp, empty = K._move_sites(
        comp, nx, ny, nz, sx, sy, sz, site_pos, site_comp,
        wsum, tx, ty, tz, 0.5 * vlen,
    )
    tess.report["empty_regions"] = int(empty)
    new_sites = [
        Site(position=(float(p[0]), float(p[1]), float(p[2])), component_id=int(c))
        for p, c in zip(new_pos, site_comp)
    ]
    mean_ds = float(disp.mean() / vlen) if disp.size else 0.0
    return new_sites, mean_ds


def lrcvt(
    grid: VoxelGrid,
    labels: LabelMap,
    seeding: SeedingParams,
    lloyd: LloydParams,
) -> tuple[Tessellation, list[float]]:
    """Seed, then alternate classification and centroidal updates until the
    mean site displacement drops below tolerance or the update budget runs
    out; returns the final classification and the per-update displacement
    trace."""
    if labels.n_components == 0:
        raise ValueError("no connected components to tessellate")
    sites, seed_report = seed_sites(grid, labels, seeding)
    weights = voxel_weights(grid, seeding)
    trace: list[float] = []
    for _ in range(lloyd.max_updates):
        tess = voronoi_classify(grid, labels, sites, weights)
        sites, mean_ds = centroidal_update(tess)
        trace.append(mean_ds)
        if mean_ds < lloyd.ds_tolerance:
            break
    final = voronoi_classify(grid, labels, sites, weights)
    final.report["seeding"] = seed_report
    final.report["updates"] = len(trace)
    return final, trace


def geodesic_oracle(
    labels: LabelMap,
    source: int,
    spacing=(1.0, 1.0, 1.0),
    initial_distance: float = 0.0,
) -> np.ndarray:
    """Exact shortest-path distances from a source voxel over the 26-neighbor
    graph whose edges join voxels of the same component (Euclidean edge
    weights). Voxels out of reach get infinity.

    Independent of the region-growing path machinery; used to validate it.
    """
    nx, ny, nz = labels.dims
    comp = labels.component
    c = comp[source]
    if c == NONE_ID:
        raise ValueError(f"source voxel {source} is out of band")
    members = np.nonzero(comp == c)[0]
    local = np.full(comp.size, -1, dtype=np.int64)
    local[members] = np.arange(members.size)
    xs = members % nx
    ys = (members // nx) % ny
    zs = members // (nx * ny)
    sx, sy, sz = spacing

    rows, cols, wts = [], [], []
    for dx, dy, dz in K.OFFSETS[: len(K.OFFSETS) // 2]:  # half: graph is symmetric
        x2, y2, z2 = xs + dx, ys + dy, zs + dz
        ok = (x2 >= 0) & (y2 >= 0) & (z2 >= 0) & (x2 < nx) & (y2 < ny) & (z2 < nz)
        tgt = x2[ok] + nx * (y2[ok] + ny * z2[ok])
        same = comp[tgt] == c
        a = local[members[ok][same]]
        b = local[tgt[same]]
        w = np.sqrt((dx * sx) ** 2 + (dy * sy) ** 2 + (dz * sz) ** 2)
        rows.append(a)
        cols.append(b)
        wts.append(np.full(a.size, w))
    m = members.size
    graph = csr_matrix(
        (np.concatenate(wts), (np.concatenate(rows), np.concatenate(cols))),
        shape=(m, m),
    )
    d_local = dijkstra(graph, directed=False, indices=int(local[source]))
    out = np.full(comp.size, np.inf)
    out[members] = d_local + initial_distance
    return out


def audit_tessellation(
    tess: Tessellation, labels: LabelMap, check_rays: bool = True
) -> dict:
    """Invariant audit: restriction, path-chain termination and site
    consistency, distance lower bound, and (optionally) per-segment ray
    validity. Returns violation counts; all zero on a healthy result."""
    nx, ny, nz = tess.dims
    sx, sy, sz = tess.spacing
    comp = labels.component
    assigned = np.nonzero(tess.site_of != NONE_ID)[0]
    site_comp = tess.site_components()
    site_pos = tess.site_positions()

    out = {}
    out["restriction_violations"] = int(
        np.count_nonzero(comp[assigned] != site_comp[tess.site_of[assigned]])
    )

    phi, max_depth = K._phi_chains(tess.site_of, tess.src)
    ok_chain = phi[assigned] >= 0
    out["broken_chains"] = int(np.count_nonzero(~ok_chain))
    out["chain_site_mismatch"] = int(
        np.count_nonzero(
            tess.site_of[assigned[ok_chain]]
            != tess.site_of[phi[assigned[ok_chain]]]
        )
    )
    max_comp = max((c.voxel_count for c in labels.component_table), default=0)
    out["max_chain_depth"] = int(max_depth)
    out["chain_depth_ok"] = bool(max_depth <= max_comp)

    centers = np.empty((assigned.size, 3))
    centers[:, 0] = (assigned % nx + 0.5) * sx
    centers[:, 1] = ((assigned // nx) % ny + 0.5) * sy
    centers[:, 2] = (assigned // (nx * ny) + 0.5) * sz
    euclid = np.linalg.norm(centers - site_pos[tess.site_of[assigned]], axis=1)
    out["euclid_bound_violations"] = int(
        np.count_nonzero(euclid > tess.dist[assigned] + 1e-9)
    )
    out["nonfinite_dist"] = int(np.count_nonzero(~np.isfinite(tess.dist[assigned])))

    if check_rays and assigned.size:
        bad = np.zeros(tess.site_of.size, dtype=np.uint8)
        K._audit_paths(
            np.ascontiguousarray(comp, dtype=np.int32),
            nx, ny, nz, sx, sy, sz, site_pos, tess.site_of, tess.src, bad,
        )
        out["segment_violations"] = int(bad.sum())
    return out
