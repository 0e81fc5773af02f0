"""Level-set-restricted centroidal Voronoi tessellation of voxel grids,
mergeable per-region statistics, a hierarchical data layout, and an
exploration service."""

from .grid import (
    NONE_ID,
    IsobandSpec,
    LabelMap,
    VoxelGrid,
    classify_isobands,
    label_components,
    load_volume,
    save_volume,
    synth_field,
)
from .layout import LayoutReader, build_and_write, load_component, reduction_estimate
from .pipeline import PipelineResult, aggregate_moments, export_layout, run_pipeline
from .projection import Embedding2D, FeatureMatrix, embed, featurize
from .seeding import SeedingParams, Site, seed_sites
from .sitegraph import FoldMetric, SiteGraph, all_pairs_paths, fold_metric, region_adjacency
from .stats import (
    GmmModel,
    Histogram1D,
    Histogram2D,
    KdeModel,
    MomentAggregate,
    accumulate,
    comoment,
    fit_gmm,
    kde_density,
    merge,
    moments_latex,
    moments_report,
    plot_data,
)
from .tessellation import (
    LloydParams,
    Tessellation,
    audit_tessellation,
    centroidal_update,
    geodesic_oracle,
    lrcvt,
    raycast_same_component,
    voronoi_classify,
    voxel_length,
)

__version__ = "0.1.0"
