"""End-to-end drivers: classify, label, tessellate, aggregate, persist.

The block driver splits the grid into axis-aligned blocks and tessellates
each independently; block faces act as additional restrictions (components
and regions never cross them), which keeps blocks independent and the merged
result deterministic. Blocks are processed in index order; within a block the
kernels parallelize over voxels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import (
    NONE_ID,
    ComponentInfo,
    IsobandSpec,
    LabelMap,
    VoxelGrid,
    classify_isobands,
    label_components,
)
from .layout import AggregateBlob, build_and_write
from .seeding import SeedingParams, Site
from .stats import MomentAggregate, accumulate, merge
from .tessellation import LloydParams, Tessellation, lrcvt


@dataclass
class PipelineResult:
    grid: VoxelGrid
    labels: LabelMap
    tess: Tessellation
    trace: list[float]
    block_traces: list[list[float]] = field(default_factory=list)


def _block_ranges(n: int, parts: int) -> list[tuple[int, int]]:
    edges = np.linspace(0, n, parts + 1).astype(int)
    return [(int(edges[i]), int(edges[i + 1])) for i in range(parts) if edges[i] < edges[i + 1]]


def run_pipeline(
    grid: VoxelGrid,
    iso: IsobandSpec,
    seeding: SeedingParams,
    lloyd: LloydParams,
    blocks: tuple[int, int, int] = (1, 1, 1),
) -> PipelineResult:
    if blocks == (1, 1, 1):
        labels = label_components(classify_isobands(grid, iso))
        tess, trace = lrcvt(grid, labels, seeding, lloyd)
        return PipelineResult(grid, labels, tess, trace, [trace])

    nx, ny, nz = grid.dims
    rx = _block_ranges(nx, blocks[0])
    ry = _block_ranges(ny, blocks[1])
    rz = _block_ranges(nz, blocks[2])
    total_in_band = int(
        np.count_nonzero(classify_isobands(grid, iso).layer != NONE_ID)
    )

    n = grid.size
    layer = np.full(n, NONE_ID, dtype=np.int32)
    component = np.full(n, NONE_ID, dtype=np.int32)
    site_of = np.full(n, NONE_ID, dtype=np.int32)
    dist = np.full(n, np.inf)
    src = np.full(n, NONE_ID, dtype=np.int32)
    state = np.zeros(n, dtype=np.uint8)
    table: list[ComponentInfo] = []
    sites: list[Site] = []
    block_traces: list[list[float]] = []
    comp_off = 0
    site_off = 0
    sx, sy, sz = grid.spacing

    for z0, z1 in rz:
        for y0, y1 in ry:
            for x0, x1 in rx:
                sub_dims = (x1 - x0, y1 - y0, z1 - z0)
                sub_fields = {}
                for name, arr in grid.fields.items():
                    v3 = arr.reshape(nz, ny, nx)[z0:z1, y0:y1, x0:x1]
                    sub_fields[name] = np.ascontiguousarray(v3).ravel()
                sub = VoxelGrid(sub_dims, grid.spacing, sub_fields)
                sub_labels = label_components(classify_isobands(sub, iso))
                if sub_labels.n_components == 0:
                    continue
                # alpha is a global budget: give the block its in-band share.
                # seed offset by the running component count keeps per-block
                # sampling streams disjoint and deterministic.
                sub_seed = SeedingParams(
                    alpha=max(
                        seeding.alpha
                        * sub_labels.in_band_count()
                        / max(total_in_band, 1),
                        1e-9,
                    ),
                    gamma=seeding.gamma,
                    weight_field=seeding.weight_field,
                    block_size=seeding.block_size,
                    seed=seeding.seed + comp_off,
                )
                tess, trace = lrcvt(sub, sub_labels, sub_seed, lloyd)
                block_traces.append(trace)

                # local -> global voxel index map
                snx, sny, snz = sub_dims
                lidx = np.arange(sub.size)
                gx = lidx % snx + x0
                gy = (lidx // snx) % sny + y0
                gz = lidx // (snx * sny) + z0
                gidx = gx + nx * (gy + ny * gz)

                in_band = sub_labels.component != NONE_ID
                layer[gidx[in_band]] = sub_labels.layer[in_band]
                component[gidx[in_band]] = sub_labels.component[in_band] + comp_off
                assigned = tess.site_of != NONE_ID
                site_of[gidx[assigned]] = tess.site_of[assigned] + site_off
                dist[gidx[assigned]] = tess.dist[assigned]
                src[gidx[assigned]] = gidx[tess.src[assigned]]
                state[gidx] = tess.state

                for info in sub_labels.component_table:
                    bb = info.bbox
                    table.append(
                        ComponentInfo(
                            id=info.id + comp_off,
                            layer=info.layer,
                            voxel_count=info.voxel_count,
                            bbox=(bb[0] + x0, bb[1] + y0, bb[2] + z0,
                                  bb[3] + x0, bb[4] + y0, bb[5] + z0),
                            band=info.band,
                        )
                    )
                for s in tess.sites:
                    sites.append(
                        Site(
                            position=(s.position[0] + x0 * sx,
                                      s.position[1] + y0 * sy,
                                      s.position[2] + z0 * sz),
                            component_id=s.component_id + comp_off,
                        )
                    )
                comp_off += sub_labels.n_components
                site_off += len(tess.sites)

    labels = LabelMap(
        dims=grid.dims, layer=layer, component=component, component_table=table,
        iso_values=list(iso.iso_values), field_name=iso.field_name,
    )
    merged = Tessellation(
        dims=grid.dims, spacing=grid.spacing, site_of=site_of, dist=dist,
        src=src, state=state, component=component, sites=sites,
        report={"blocks": blocks, "n_blocks": len(block_traces)},
    )
    trace = _combine_traces(block_traces)
    return PipelineResult(grid, labels, merged, trace, block_traces)


def _combine_traces(block_traces: list[list[float]]) -> list[float]:
    if not block_traces:
        return []
    length = max(len(t) for t in block_traces)
    out = []
    for i in range(length):
        vals = [t[i] for t in block_traces if i < len(t)]
        out.append(float(np.mean(vals)))
    return out


# ---------------------------------------------------------------------------
# Aggregation


def default_pairs(field_names: list[str]) -> list[tuple[str, str]]:
    """All unordered field pairs, including each field with itself."""
    out = []
    for i, a in enumerate(field_names):
        for b in field_names[i:]:
            out.append((a, b))
    return out


def aggregate_moments(
    grid: VoxelGrid,
    labels: LabelMap,
    tess: Tessellation,
    pairs: list[tuple[str, str]] | None = None,
) -> list[AggregateBlob]:
    """Per-region moment aggregates, rolled up to components and layers by
    merging (never re-accumulated), one set per variable pair."""
    pairs = pairs or default_pairs(grid.field_names())
    blobs: list[AggregateBlob] = []
    in_band = np.nonzero(labels.component != NONE_ID)[0]
    comp = labels.component[in_band]
    region = tess.site_of[in_band]
    site_comp = tess.site_components()
    layer_of_comp = {c.id: c.layer for c in labels.component_table}

    for x_name, y_name in pairs:
        fx = grid.fields[x_name].astype(np.float64)
        fy = grid.fields[y_name].astype(np.float64)
        region_aggs: dict[int, MomentAggregate] = {}
        stray: dict[int, MomentAggregate] = {}  # unassigned voxels per component
        for rid in range(len(tess.sites)):
            sel = in_band[region == rid]
            agg = accumulate(
                np.stack([fx[sel], fy[sel]], axis=1), x_name, y_name
            )
            region_aggs[rid] = agg
            blobs.append(AggregateBlob.moments("region", rid, agg))
        unassigned = in_band[region == NONE_ID]
        for c in np.unique(comp[region == NONE_ID]) if unassigned.size else []:
            sel = unassigned[labels.component[unassigned] == c]
            stray[int(c)] = accumulate(
                np.stack([fx[sel], fy[sel]], axis=1), x_name, y_name
            )

        comp_aggs: dict[int, MomentAggregate] = {}
        for info in labels.component_table:
            agg = MomentAggregate(x_name=x_name, y_name=y_name)
            for rid in np.nonzero(site_comp == info.id)[0]:
                agg = merge(agg, region_aggs[int(rid)])
            if info.id in stray:
                agg = merge(agg, stray[info.id])
            comp_aggs[info.id] = agg
            blobs.append(AggregateBlob.moments("component", info.id, agg))

        for li in range(labels.n_layers):
            agg = MomentAggregate(x_name=x_name, y_name=y_name)
            for cid, a in comp_aggs.items():
                if layer_of_comp[cid] == li:
                    agg = merge(agg, a)
            blobs.append(AggregateBlob.moments("layer", li, agg))
    return blobs


def export_layout(
    result: PipelineResult,
    path,
    pairs: list[tuple[str, str]] | None = None,
    with_aggregates: bool = True,
) -> dict:
    blobs = (
        aggregate_moments(result.grid, result.labels, result.tess, pairs)
        if with_aggregates
        else []
    )
    return build_and_write(result.grid, result.labels, result.tess, blobs, path)
