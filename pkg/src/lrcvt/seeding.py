"""Stratified, mass-weighted initial placement of Voronoi sites.

Each component receives a site count proportional to its mass (sum of voxel
weights raised to the attraction exponent), with at least one site. Within a
component, counts are apportioned over axis-aligned blocks by the largest
remainder rule, and positions are drawn inside each block by weighted
sampling without replacement.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import NONE_ID, LabelMap, VoxelGrid


@dataclass
class SeedingParams:
    alpha: float = 100.0  # total site budget over the in-band volume
    gamma: float = 1.0  # attraction exponent on the weight field
    weight_field: str | None = None  # default: uniform weight 1
    block_size: int = 16  # stratification block edge, in voxels
    seed: int = 0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.gamma < 0:
            raise ValueError("gamma must be non-negative")
        if self.block_size < 1:
            raise ValueError("block_size must be >= 1")


@dataclass
class Site:
    position: tuple[float, float, float]
    component_id: int


@dataclass
class Block:
    """One stratification cell of a component: member voxels and their mass."""

    index: int  # row-major block index; ties in apportionment break low
    mass: float
    voxels: np.ndarray  # flat voxel indices
    weights: np.ndarray  # m_v ** gamma per voxel


@dataclass
class MassTable:
    total_mass: float  # m(V, gamma): sum over all in-band voxels
    comp_mass: np.ndarray  # per component
    comp_blocks: list[list[Block]]


def voxel_weights(grid: VoxelGrid, params: SeedingParams) -> np.ndarray:
    """Per-voxel weight m_v ** gamma over the full grid."""
    if params.weight_field is None:
        return np.ones(grid.size)
    if params.weight_field not in grid.fields:
        raise KeyError(f"unknown weight field '{params.weight_field}'")
    m = grid.fields[params.weight_field].astype(np.float64)
    if np.any(m < 0):
        raise ValueError(f"weight field '{params.weight_field}' has negative values")
    return m**params.gamma


def component_masses(
    grid: VoxelGrid, labels: LabelMap, params: SeedingParams
) -> MassTable:
    """Exact per-component and per-block masses (sums of m_v ** gamma)."""
    nx, ny, nz = grid.dims
    bs = params.block_size
    nbx = -(-nx // bs)
    nby = -(-ny // bs)
    w_full = voxel_weights(grid, params)
    in_band = np.nonzero(labels.component != NONE_ID)[0]
    comp = labels.component[in_band]
    w = w_full[in_band]
    xs = in_band % nx
    ys = (in_band // nx) % ny
    zs = in_band // (nx * ny)
    bk = (xs // bs) + nbx * ((ys // bs) + nby * (zs // bs))

    order = np.lexsort((in_band, bk, comp))
    comp_s, bk_s, vox_s, w_s = comp[order], bk[order], in_band[order], w[order]

    n_comps = labels.n_components
    comp_mass = np.zeros(n_comps)
    comp_blocks: list[list[Block]] = [[] for _ in range(n_comps)]
    # walk runs of (component, block)
    boundaries = np.nonzero((np.diff(comp_s) != 0) | (np.diff(bk_s) != 0))[0] + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [comp_s.size]))
    for s, e in zip(starts, ends):
        c = int(comp_s[s])
        mass = float(np.sum(w_s[s:e]))
        comp_blocks[c].append(
            Block(index=int(bk_s[s]), mass=mass, voxels=vox_s[s:e], weights=w_s[s:e])
        )
        comp_mass[c] += mass
    return MassTable(
        total_mass=float(np.sum(w)), comp_mass=comp_mass, comp_blocks=comp_blocks
    )


def sites_per_component(masses: MassTable, alpha: float) -> np.ndarray:
    """Target site count per component: ceil of the component's fair share of
    the alpha budget, floored at 1 for every non-empty component."""
    if masses.total_mass <= 0:
        raise ValueError("total in-band mass is zero; nothing to seed")
    shares = alpha * masses.comp_mass / masses.total_mass
    n_c = np.ceil(shares - 1e-12 * np.maximum(1.0, np.abs(shares))).astype(np.int64)
    has_voxels = np.array([len(b) > 0 for b in masses.comp_blocks])
    n_c[has_voxels] = np.maximum(n_c[has_voxels], 1)
    n_c[~has_voxels] = 0
    return n_c


def apportion_counts(block_masses: np.ndarray, n: int) -> np.ndarray:
    """Largest-remainder apportionment of n over blocks, proportional to mass.

    Every block gets the floor of its fair share; leftovers go to the largest
    fractional remainders, ties broken by lower block position.
    """
    block_masses = np.asarray(block_masses, dtype=np.float64)
    total = block_masses.sum()
    if total <= 0:
        # degenerate: spread uniformly, low indices first
        counts = np.full(block_masses.size, n // block_masses.size, dtype=np.int64)
        counts[: n % block_masses.size] += 1
        return counts
    fair = n * block_masses / total
    counts = np.floor(fair).astype(np.int64)
    leftover = n - int(counts.sum())
    if leftover > 0:
        frac = fair - counts
        order = np.lexsort((np.arange(frac.size), -frac))
        counts[order[:leftover]] += 1
    return counts


def distribute_sites(
    blocks: list[Block], n_c: int, rng: np.random.Generator
) -> tuple[list[np.int64], int]:
    """Pick n_c distinct voxels across the blocks of one component.

    Returns (chosen voxel indices, actually placed count). The count is
    clamped to the component's voxel count when n_c exceeds it.
    """
    capacity = sum(b.voxels.size for b in blocks)
    placed = min(n_c, capacity)
    counts = apportion_counts(np.array([b.mass for b in blocks]), placed)
    counts = _cap_to_capacity(counts, blocks, placed)
    chosen: list[np.int64] = []
    for b, cnt in zip(blocks, counts):
        if cnt == 0:
            continue
        chosen.extend(_sample_block(b, int(cnt), rng))
    return chosen, placed


def _cap_to_capacity(counts, blocks, total):
    """Move overflow from blocks beyond their voxel count to ones with room,
    preferring the most underrepresented (largest mass-share deficit)."""
    caps = np.array([b.voxels.size for b in blocks], dtype=np.int64)
    masses = np.array([b.mass for b in blocks])
    over = counts - caps
    if not np.any(over > 0):
        return counts
    counts = np.minimum(counts, caps)
    spill = int(total - counts.sum())
    mass_total = masses.sum()
    while spill > 0:
        deficit = total * masses / mass_total - counts
        deficit[counts >= caps] = -np.inf
        i = int(np.lexsort((np.arange(deficit.size), -deficit))[0])
        counts[i] += 1
        spill -= 1
    return counts


def _sample_block(block: Block, cnt: int, rng: np.random.Generator):
    w = block.weights
    pos_mask = w > 0
    n_pos = int(np.count_nonzero(pos_mask))
    if n_pos >= cnt:
        p = w / w.sum()
        return list(rng.choice(block.voxels, size=cnt, replace=False, p=p))
    # not enough positive-weight voxels: take them all, fill uniformly
    chosen = list(block.voxels[pos_mask])
    rest = block.voxels[~pos_mask]
    extra = rng.choice(rest, size=cnt - n_pos, replace=False)
    return chosen + list(extra)


def seed_sites(
    grid: VoxelGrid, labels: LabelMap, params: SeedingParams
) -> tuple[list[Site], dict]:
    """Full stratified seeding over all components.

    Each component samples from its own generator stream (seed XOR component
    id), so output does not depend on processing order.
    """
    masses = component_masses(grid, labels, params)
    n_c = sites_per_component(masses, params.alpha)
    nx, ny, nz = grid.dims
    sx, sy, sz = grid.spacing
    sites: list[Site] = []
    clamped: dict[int, int] = {}
    for c in range(labels.n_components):
        if n_c[c] == 0:
            continue
        rng = np.random.default_rng((int(params.seed) & 0xFFFFFFFFFFFFFFFF) ^ c)
        chosen, placed = distribute_sites(masses.comp_blocks[c], int(n_c[c]), rng)
        if placed < n_c[c]:
            clamped[c] = placed
        for v in chosen:
            v = int(v)
            x = (v % nx + 0.5) * sx
            y = ((v // nx) % ny + 0.5) * sy
            z = (v // (nx * ny) + 0.5) * sz
            sites.append(Site(position=(x, y, z), component_id=c))
    report = {
        "n_sites": len(sites),
        "n_components": labels.n_components,
        "clamped_components": clamped,
        "target_counts": n_c.tolist(),
    }
    return sites, report
