import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from lrcvt.grid import (
    IsobandSpec,
    VoxelGrid,
    classify_isobands,
    label_components,
    synth_field,
)
from lrcvt.pipeline import export_layout, run_pipeline
from lrcvt.seeding import SeedingParams, Site
from lrcvt.tessellation import LloydParams, voronoi_classify


@pytest.fixture(scope="session", autouse=True)
def warm_kernels():
    """Compile the numba kernels once on a tiny grid so individual tests
    measure algorithm time, not compilation."""
    grid = synth_field("rings", (12, 12, 1), 0)
    labels = label_components(classify_isobands(grid, IsobandSpec("f", [0.2, 0.9])))
    v = int(np.nonzero(labels.component == 0)[0][0])
    nx = grid.dims[0]
    sites = [Site((v % nx + 0.5, v // nx + 0.5, 0.5), 0)]
    tess = voronoi_classify(grid, labels, sites)
    from lrcvt.tessellation import audit_tessellation, centroidal_update

    centroidal_update(tess)
    audit_tessellation(tess, labels)


def make_rect_grid(nx, ny, nz=1, spacing=(1.0, 1.0, 1.0), fill=0.5):
    f = np.full(nx * ny * nz, fill, dtype=np.float32)
    return VoxelGrid((nx, ny, nz), spacing, {"f": f})


def rect_labels(grid):
    return label_components(classify_isobands(grid, IsobandSpec("f", [0.0, 1.0])))


@pytest.fixture(scope="session")
def u_fixture():
    """Single U-shaped component with hand-placed sites at the two tips."""
    grid = synth_field("horseshoe", (64, 64, 1), 0)
    labels = label_components(classify_isobands(grid, IsobandSpec("f", [0.0, 0.12])))
    assert labels.n_components == 1
    nx, ny, _ = labels.dims
    tips = [(32 - 14.08, 9.0, 0.5), (32 + 14.08, 9.0, 0.5)]
    sites = []
    for t in tips:
        v = int(t[0]) + nx * (int(t[1]) + ny * int(t[2]))
        assert labels.component[v] == 0
        sites.append(Site(t, 0))
    return grid, labels, sites


@pytest.fixture(scope="session")
def explore_file(tmp_path_factory):
    """A tessellated + aggregated layout file for service/layout tests."""
    grid = synth_field("spiral", (48, 48, 1), 0)
    iso = IsobandSpec("f", [0.3, 0.55, 0.8])
    result = run_pipeline(
        grid, iso, SeedingParams(alpha=40, seed=7),
        LloydParams(max_updates=6, ds_tolerance=0.05),
    )
    path = tmp_path_factory.mktemp("layout") / "explore.lrcvt"
    summary = export_layout(result, path)
    return {"path": path, "result": result, "summary": summary}


@pytest.fixture(scope="session")
def tiny_hierarchy_file(tmp_path_factory):
    """2 layers, 3 components: two strips in band 0, one in band 1."""
    nx, ny = 30, 12
    f = np.zeros(nx * ny, dtype=np.float32)
    f3 = f.reshape(1, ny, nx)[0]
    f3[2:5, 2:12] = 0.3  # band 0, component A
    f3[2:5, 18:28] = 0.3  # band 0, component B
    f3[7:10, 6:24] = 0.7  # band 1, component C
    g = np.linspace(0, 1, nx * ny, dtype=np.float32)
    grid = VoxelGrid((nx, ny, 1), (1.0, 1.0, 1.0), {"f": f, "g": g})
    iso = IsobandSpec("f", [0.1, 0.5, 0.9])
    result = run_pipeline(
        grid, iso, SeedingParams(alpha=9, seed=2, block_size=8),
        LloydParams(max_updates=3, ds_tolerance=0.05),
    )
    assert result.labels.n_components == 3
    path = tmp_path_factory.mktemp("tiny") / "tiny.lrcvt"
    export_layout(result, path)
    return {"path": path, "result": result}
