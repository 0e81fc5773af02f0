"""Voxel grid data model, isoband classification, and connected components.

Grids are uniform, axis-aligned boxes of ``nx * ny * nz`` voxels. All per-voxel
arrays are flat, row-major with x fastest: ``index = x + nx * (y + ny * z)``.
2D data is represented with ``nz == 1``; every algorithm operates uniformly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import ndimage

NONE_ID = -1

SYNTH_KINDS = ("rings", "spiral", "horseshoe", "gaussian-mix", "random-smooth")


@dataclass
class VoxelGrid:
    """A uniform voxel grid with named scalar fields.

    dims: (nx, ny, nz), all positive. spacing: voxel edge lengths in world
    units. fields: name -> float32 array of length nx*ny*nz.
    """

    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    fields: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.dims = tuple(int(d) for d in self.dims)
        self.spacing = tuple(float(s) for s in self.spacing)
        if len(self.dims) != 3 or any(d < 1 for d in self.dims):
            raise ValueError(f"dims must be 3 positive integers, got {self.dims}")
        if len(self.spacing) != 3 or any(s <= 0 for s in self.spacing):
            raise ValueError(f"spacing must be 3 positive reals, got {self.spacing}")
        n = self.size
        for name, arr in list(self.fields.items()):
            arr = np.ascontiguousarray(arr, dtype=np.float32).ravel()
            if arr.size != n:
                raise ValueError(
                    f"field '{name}' has {arr.size} values, expected {n}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"field '{name}' contains non-finite values")
            self.fields[name] = arr

    @property
    def size(self) -> int:
        nx, ny, nz = self.dims
        return nx * ny * nz

    def field_names(self) -> list[str]:
        return list(self.fields.keys())

    def view3d(self, name: str) -> np.ndarray:
        """Field as a (nz, ny, nx) view; ``view[z, y, x]`` matches flat order."""
        nx, ny, nz = self.dims
        return self.fields[name].reshape(nz, ny, nx)

    def voxel_centers(self) -> np.ndarray:
        """(N, 3) world coordinates of all voxel centers, in flat order."""
        nx, ny, nz = self.dims
        sx, sy, sz = self.spacing
        z, y, x = np.meshgrid(
            np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij"
        )
        out = np.empty((self.size, 3))
        out[:, 0] = (x.ravel() + 0.5) * sx
        out[:, 1] = (y.ravel() + 0.5) * sy
        out[:, 2] = (z.ravel() + 0.5) * sz
        return out


@dataclass
class IsobandSpec:
    """k bands over one field, delimited by k+1 strictly increasing iso values.

    Band i is the half-open interval (iso_values[i], iso_values[i+1]].
    """

    field_name: str
    iso_values: list[float]

    def __post_init__(self):
        self.iso_values = [float(v) for v in self.iso_values]
        if len(self.iso_values) < 2:
            raise ValueError("need at least 2 iso values (1 band)")
        diffs = np.diff(self.iso_values)
        if not np.all(diffs > 0):
            raise ValueError(f"iso values must be strictly increasing: {self.iso_values}")

    @property
    def n_bands(self) -> int:
        return len(self.iso_values) - 1


@dataclass
class ComponentInfo:
    """Catalog entry for one face-connected component of one band."""

    id: int
    layer: int
    voxel_count: int
    bbox: tuple[int, int, int, int, int, int]  # x0,y0,z0,x1,y1,z1 inclusive
    band: tuple[float, float]


@dataclass
class LabelMap:
    """Per-voxel (layer, component) ids plus the component catalog.

    ``layer[v]`` is the band index or NONE_ID; ``component[v]`` is a dense
    global component id or NONE_ID. The two are NONE together.
    """

    dims: tuple[int, int, int]
    layer: np.ndarray
    component: np.ndarray
    component_table: list[ComponentInfo] = field(default_factory=list)
    iso_values: list[float] = field(default_factory=list)
    field_name: str = ""

    @property
    def n_components(self) -> int:
        return len(self.component_table)

    @property
    def n_layers(self) -> int:
        return max(len(self.iso_values) - 1, 0)

    def in_band_count(self) -> int:
        return int(np.count_nonzero(self.layer != NONE_ID))


def classify_isobands(grid: VoxelGrid, spec: IsobandSpec) -> LabelMap:
    """Assign each voxel to a band: layer i iff iso[i] < f(v) <= iso[i+1].

    Voxels at or below the first iso value, or above the last, get NONE_ID.
    Component ids are left unset; call :func:`label_components` next.
    """
    if spec.field_name not in grid.fields:
        raise KeyError(
            f"unknown field '{spec.field_name}'; grid has {grid.field_names()}"
        )
    f = grid.fields[spec.field_name].astype(np.float64)
    iso = np.asarray(spec.iso_values)
    # searchsorted with side='left' maps f in (iso[i], iso[i+1]] to i+1
    idx = np.searchsorted(iso, f, side="left")
    layer = (idx - 1).astype(np.int32)
    layer[(idx == 0) | (idx == len(iso))] = NONE_ID
    component = np.full(grid.size, NONE_ID, dtype=np.int32)
    return LabelMap(
        dims=grid.dims,
        layer=layer,
        component=component,
        iso_values=list(spec.iso_values),
        field_name=spec.field_name,
    )


def label_components(labels: LabelMap) -> LabelMap:
    """Label maximal face-connected (6-conn / 4-conn) components per layer.

    Ids are dense and deterministic: ordered by layer, then by the first
    member voxel in row-major order. Returns a new LabelMap sharing the
    layer array.
    """
    nx, ny, nz = labels.dims
    layer3d = labels.layer.reshape(nz, ny, nx)
    component = np.full(labels.layer.size, NONE_ID, dtype=np.int32)
    table: list[ComponentInfo] = []
    structure = ndimage.generate_binary_structure(3, 1)  # face adjacency
    n_layers = labels.n_layers if labels.iso_values else int(labels.layer.max()) + 1
    next_id = 0
    for li in range(n_layers):
        mask = layer3d == li
        if not mask.any():
            continue
        raw, n_raw = ndimage.label(mask, structure=structure)
        raw_flat = raw.ravel()
        # order components by first occurrence in row-major (x fastest) order
        ids, first = np.unique(raw_flat, return_index=True)
        keep = ids > 0
        order = np.argsort(first[keep])
        remap = np.zeros(n_raw + 1, dtype=np.int32)
        remap[ids[keep][order]] = next_id + np.arange(order.size, dtype=np.int32)
        in_layer = raw_flat > 0
        component[in_layer] = remap[raw_flat[in_layer]]
        band = (
            (labels.iso_values[li], labels.iso_values[li + 1])
            if labels.iso_values
            else (float("nan"), float("nan"))
        )
        objects = ndimage.find_objects(raw)
        counts = np.bincount(raw_flat[in_layer], minlength=n_raw + 1)
        for raw_id in ids[keep][order]:
            zs, ys, xs = objects[raw_id - 1]
            table.append(
                ComponentInfo(
                    id=int(remap[raw_id]),
                    layer=li,
                    voxel_count=int(counts[raw_id]),
                    bbox=(xs.start, ys.start, zs.start, xs.stop - 1, ys.stop - 1, zs.stop - 1),
                    band=band,
                )
            )
        next_id += int(order.size)
    return LabelMap(
        dims=labels.dims,
        layer=labels.layer,
        component=component,
        component_table=table,
        iso_values=list(labels.iso_values),
        field_name=labels.field_name,
    )


def classify_and_label(grid: VoxelGrid, spec: IsobandSpec) -> LabelMap:
    return label_components(classify_isobands(grid, spec))


# ---------------------------------------------------------------------------
# Synthetic fields


def _coords(dims):
    nx, ny, nz = dims
    z, y, x = np.meshgrid(np.arange(nz), np.arange(ny), np.arange(nx), indexing="ij")
    return x.ravel() + 0.5, y.ravel() + 0.5, z.ravel() + 0.5


def _smooth_noise(dims, rng, sigma_frac=1 / 12) -> np.ndarray:
    nx, ny, nz = dims
    noise = rng.standard_normal((nz, ny, nx))
    sig = [max(d * sigma_frac, 0.5) if d > 1 else 0 for d in (nz, ny, nx)]
    sm = ndimage.gaussian_filter(noise, sigma=sig)
    sm -= sm.min()
    rng_span = sm.max() - sm.min()
    if rng_span > 0:
        sm /= rng_span
    return sm.ravel()


def synth_field(kind: str, dims, seed: int = 0) -> VoxelGrid:
    """Deterministic synthetic test volume with fields 'f' (level-set driver)
    and 'g' (a smooth companion in [0, 1], usable as a weight).

    Kinds: rings (concentric bands), spiral (contorted arms; helical in 3D),
    horseshoe (mid-band is a single U-shaped tube), gaussian-mix,
    random-smooth.
    """
    if kind not in SYNTH_KINDS:
        raise ValueError(f"unknown synth kind '{kind}'; choose from {SYNTH_KINDS}")
    dims = tuple(int(d) for d in dims)
    nx, ny, nz = dims
    rng = np.random.default_rng(seed)
    x, y, z = _coords(dims)
    cx, cy, cz = nx / 2, ny / 2, nz / 2

    if kind == "rings":
        r = np.sqrt((x - cx) ** 2 + (y - cy) ** 2 + (z - cz) ** 2)
        f = r / (0.5 * max(nx, ny, nz))
    elif kind == "spiral":
        theta = np.arctan2(y - cy, x - cx)
        r = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
        twist = 10.0 / max(nx, ny)
        phase = 2.0 * theta + twist * 2 * np.pi * r / 4.0
        if nz > 1:
            phase = phase + 2 * np.pi * z / nz
        f = 0.5 * (1.0 + np.cos(phase)) * np.clip(r / (0.55 * min(nx, ny)), 0, 1.2)
    elif kind == "horseshoe":
        f = _horseshoe_distance(dims, x, y, z)
    elif kind == "gaussian-mix":
        k = 4
        centers = rng.uniform(0.2, 0.8, size=(k, 3)) * np.array([nx, ny, nz])
        widths = rng.uniform(0.08, 0.2, size=k) * max(nx, ny, nz)
        f = np.zeros(nx * ny * nz)
        for i in range(k):
            d2 = (x - centers[i, 0]) ** 2 + (y - centers[i, 1]) ** 2
            if nz > 1:
                d2 = d2 + (z - centers[i, 2]) ** 2
            f += np.exp(-0.5 * d2 / widths[i] ** 2)
        f /= f.max()
    else:  # random-smooth
        f = _smooth_noise(dims, rng, sigma_frac=1 / 10)

    g = _smooth_noise(dims, np.random.default_rng(seed + 1))
    return VoxelGrid(
        dims=dims,
        spacing=(1.0, 1.0, 1.0),
        fields={"f": f.astype(np.float32), "g": g.astype(np.float32)},
    )


def _horseshoe_distance(dims, x, y, z):
    """Normalized distance to a U-shaped curve (arc up top, two long arms)."""
    nx, ny, nz = dims
    cx = nx / 2
    radius = 0.22 * nx
    arc_cy = 0.68 * ny
    arm_bottom = 0.12 * ny
    dx = x - cx
    dy = y - arc_cy
    # distance to upper semicircle (the half with y >= arc center)
    r = np.sqrt(dx**2 + dy**2)
    on_upper = dy >= 0
    d_arc = np.abs(r - radius)
    # below the arc center the closest arc point is one of the arc ends
    d_end = np.minimum(
        np.sqrt((x - (cx - radius)) ** 2 + (y - arc_cy) ** 2),
        np.sqrt((x - (cx + radius)) ** 2 + (y - arc_cy) ** 2),
    )
    d_arc = np.where(on_upper, d_arc, d_end)
    # arms: vertical segments from arm_bottom to arc_cy at x = cx +- radius
    d_arm = np.minimum(
        _segment_distance(x, y, cx - radius, arm_bottom, cx - radius, arc_cy),
        _segment_distance(x, y, cx + radius, arm_bottom, cx + radius, arc_cy),
    )
    d = np.minimum(d_arc, d_arm)
    if nz > 1:
        # extrude along z with soft falloff away from the mid-slab
        dz = np.maximum(np.abs(z - nz / 2) - 0.25 * nz, 0)
        d = np.sqrt(d**2 + dz**2)
    return d / (0.5 * nx)


def _segment_distance(px, py, ax, ay, bx, by):
    abx, aby = bx - ax, by - ay
    t = np.clip(((px - ax) * abx + (py - ay) * aby) / (abx**2 + aby**2), 0, 1)
    return np.sqrt((px - (ax + t * abx)) ** 2 + (py - (ay + t * aby)) ** 2)


# ---------------------------------------------------------------------------
# Volume file I/O: raw little-endian f32 per field + JSON sidecar


def save_volume(grid: VoxelGrid, meta_path: str | Path) -> Path:
    """Write one raw f32 file per field plus the JSON metadata sidecar."""
    meta_path = Path(meta_path)
    meta_path.parent.mkdir(parents=True, exist_ok=True)
    fields = []
    for name, arr in grid.fields.items():
        fname = f"{meta_path.stem}_{name}.f32"
        arr.astype("<f4").tofile(meta_path.parent / fname)
        fields.append({"name": name, "file": fname})
    meta = {
        "dims": list(grid.dims),
        "spacing": list(grid.spacing),
        "fields": fields,
    }
    meta_path.write_text(json.dumps(meta, indent=2))
    return meta_path


def load_volume(meta_path: str | Path) -> VoxelGrid:
    """Load a volume from its JSON sidecar, validating file sizes."""
    meta_path = Path(meta_path)
    meta = json.loads(meta_path.read_text())
    dims = tuple(meta["dims"])
    nx, ny, nz = dims
    expected_bytes = nx * ny * nz * 4
    fields = {}
    for entry in meta["fields"]:
        fpath = meta_path.parent / entry["file"]
        actual = fpath.stat().st_size
        if actual != expected_bytes:
            raise ValueError(
                f"field file '{fpath}' is {actual} bytes, expected "
                f"{expected_bytes} (= {nx}*{ny}*{nz}*4)"
            )
        fields[entry["name"]] = np.fromfile(fpath, dtype="<f4")
    return VoxelGrid(dims=dims, spacing=tuple(meta["spacing"]), fields=fields)
