"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion lines.
"""

import json
import time

import numpy as np

from lrcvt.grid import (
    IsobandSpec,
    VoxelGrid,
    classify_isobands,
    label_components,
    synth_field,
)
from lrcvt.layout import LayoutReader, record_dtype
from lrcvt.pipeline import export_layout, run_pipeline
from lrcvt.projection import embed, featurize
from lrcvt.seeding import SeedingParams, Site, apportion_counts, seed_sites
from lrcvt.sitegraph import all_pairs_paths, fold_metric, region_adjacency
from lrcvt.stats import accumulate, comoment, fit_gmm, merge
from lrcvt.tessellation import (
    LloydParams,
    audit_tessellation,
    geodesic_oracle,
    lrcvt,
    voronoi_classify,
)

from oracles import floyd_warshall, largest_remainder_enumeration


def report(name: str, ok: bool, detail: str):
    print(f"\n[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


def spiral_labels(dims, iso=(0.3, 0.55, 0.8), seed=0):
    grid = synth_field("spiral", dims, seed)
    return grid, label_components(classify_isobands(grid, IsobandSpec("f", list(iso))))


def horseshoe_labels(dims, iso=(0.0, 0.12, 0.3), seed=0):
    grid = synth_field("horseshoe", dims, seed)
    return grid, label_components(classify_isobands(grid, IsobandSpec("f", list(iso))))


def site_oracle_distances(labels, sites, spacing=(1.0, 1.0, 1.0)):
    """Dijkstra-26 distances to every site (offset so they measure to the
    exact site point, not its voxel center)."""
    nx, ny, _ = labels.dims
    rows = []
    for s in sites:
        sx, sy, sz = spacing
        v = (
            int(s.position[0] / sx)
            + nx * (int(s.position[1] / sy) + ny * int(s.position[2] / sz))
        )
        center = ((v % nx + 0.5) * sx, ((v // nx) % ny + 0.5) * sy,
                  (v // (nx * ny) + 0.5) * sz)
        off = float(np.linalg.norm(np.subtract(center, s.position)))
        rows.append(geodesic_oracle(labels, v, spacing, off))
    return np.vstack(rows)


def test_restriction_invariant_20_seeds():
    t0 = time.time()
    violations = 0
    runs = 0
    grid_h, labels_h = horseshoe_labels((128, 128, 1))
    grid_s, labels_s = spiral_labels((96, 96, 96), iso=(0.55, 0.75, 0.95))
    for seed in range(20):
        for grid, labels, alpha, updates in (
            (grid_h, labels_h, 120, 3),
            (grid_s, labels_s, 600, 1),
        ):
            tess, _ = lrcvt(
                grid, labels, SeedingParams(alpha=alpha, seed=seed),
                LloydParams(max_updates=updates, ds_tolerance=0.25),
            )
            site_comp = tess.site_components()
            assigned = tess.site_of >= 0
            violations += int(
                np.count_nonzero(
                    labels.component[assigned] != site_comp[tess.site_of[assigned]]
                )
            )
            runs += 1
    elapsed = time.time() - t0
    report(
        "restriction-invariant",
        violations == 0 and elapsed < 60.0,
        f"{violations} cross-component assignments over {runs} runs "
        f"(horseshoe 128^2 + spiral 96^3, 20 seeds each) in {elapsed:.1f}s",
    )


def test_convex_case_exactness():
    nx, ny = 50, 40
    grid = VoxelGrid((nx, ny, 1), (1, 1, 1), {"f": np.full(nx * ny, 0.5, np.float32)})
    labels = label_components(classify_isobands(grid, IsobandSpec("f", [0.0, 1.0])))
    rng = np.random.default_rng(123)  # tie-free seed (continuous positions)
    pts = rng.uniform((0.5, 0.5), (nx - 0.5, ny - 0.5), size=(25, 2))
    sites = [Site((float(x), float(y), 0.5), 0) for x, y in pts]
    tess = voronoi_classify(grid, labels, sites)
    centers = grid.voxel_centers()
    d = np.linalg.norm(
        centers[:, None, :] - np.array([s.position for s in sites])[None], axis=2
    )
    gaps = np.partition(d, 1, axis=1)
    assert np.all(gaps[:, 1] - gaps[:, 0] > 1e-9), "seed produced distance ties"
    match = float(np.mean(d.argmin(axis=1) == tess.site_of))
    report(
        "convex-case-exactness",
        match == 1.0,
        f"{match * 100:.2f}% of voxels match brute-force Euclidean nearest site "
        f"(25 sites)",
    )


FIXTURES = [
    ("u-band", lambda: horseshoe_labels((64, 64, 1), iso=(0.0, 0.12))[0:2], 10, 3),
    ("horseshoe-128", lambda: horseshoe_labels((128, 128, 1))[0:2], 40, 4),
    ("spiral-64", lambda: spiral_labels((64, 64, 1))[0:2], 60, 5),
    ("rings-48", lambda: spiral_labels((48, 48, 1), iso=(0.2, 0.5, 0.8), seed=1)[0:2], 30, 6),
    ("smooth-3d", lambda: (
        synth_field("random-smooth", (24, 24, 24), 2),
        label_components(
            classify_isobands(
                synth_field("random-smooth", (24, 24, 24), 2),
                IsobandSpec("f", [0.35, 0.75]),
            )
        ),
    ), 30, 7),
]


def test_distance_sandwich_all_fixtures():
    worst_low = worst_high = 0.0
    checked = 0
    for name, make, alpha, seed in FIXTURES:
        grid, labels = make()
        sites, _ = seed_sites(grid, labels, SeedingParams(alpha=alpha, seed=seed))
        tess = voronoi_classify(grid, labels, sites)
        assigned = np.nonzero(tess.site_of >= 0)[0]
        pos = tess.site_positions()
        nx, ny, _ = grid.dims
        centers = np.stack(
            [
                (assigned % nx + 0.5),
                ((assigned // nx) % ny + 0.5),
                (assigned // (nx * ny) + 0.5),
            ],
            axis=1,
        )
        euclid = np.linalg.norm(centers - pos[tess.site_of[assigned]], axis=1)
        oracle = site_oracle_distances(labels, sites)
        upper = oracle[tess.site_of[assigned], assigned]
        worst_low = max(worst_low, float(np.max(euclid - tess.dist[assigned])))
        worst_high = max(worst_high, float(np.max(tess.dist[assigned] - upper)))
        checked += assigned.size
    ok = worst_low <= 1e-9 and worst_high <= 1e-6
    report(
        "distance-sandwich",
        ok,
        f"euclid <= dist <= dijkstra26 over {checked} voxels on "
        f"{len(FIXTURES)} fixtures (max low-side {worst_low:.2e}, "
        f"max high-side {worst_high:.2e})",
    )


def test_oracle_agreement_on_u(tmp_path):
    grid, labels = horseshoe_labels((64, 64, 1), iso=(0.0, 0.12))
    assert labels.n_components == 1
    nx = labels.dims[0]
    tips = [(32 - 14.08, 9.0, 0.5), (32 + 14.08, 9.0, 0.5)]
    sites = [Site(t, 0) for t in tips]
    tess = voronoi_classify(grid, labels, sites)
    oracle = site_oracle_distances(labels, sites)
    assigned = np.nonzero(tess.site_of >= 0)[0]
    oracle_best = oracle.argmin(axis=0)[assigned]
    agree_mask = oracle_best == tess.site_of[assigned]
    agreement = float(np.mean(agree_mask))

    disagreements = assigned[~agree_mask]
    audit = {
        "fixture": "u-band-64",
        "voxels": int(assigned.size),
        "agreement": agreement,
        "disagreements": [
            {
                "voxel": int(v),
                "assigned": int(tess.site_of[v]),
                "oracle": int(oracle.argmin(axis=0)[v]),
                "dist": float(tess.dist[v]),
                "oracle_margin": float(abs(oracle[0, v] - oracle[1, v])),
            }
            for v in disagreements
        ],
    }
    out = tmp_path / "u_agreement_audit.json"
    out.write_text(json.dumps(audit, indent=1))
    report(
        "oracle-classification-agreement",
        agreement >= 0.95 and out.exists(),
        f"{agreement * 100:.2f}% of {assigned.size} voxels agree with the "
        f"Dijkstra-26 oracle; audit report at {out}",
    )


def test_convergence_three_densities():
    grid, labels = spiral_labels((128, 128, 1))
    details = []
    ok = True
    for alpha in (100, 200, 400):
        _, trace = lrcvt(
            grid, labels, SeedingParams(alpha=alpha, seed=42),
            LloydParams(max_updates=50, ds_tolerance=0.25),
        )
        below_05 = next((i for i, t in enumerate(trace, 1) if t < 0.5), None)
        rises = sum(1 for a, b in zip(trace, trace[1:]) if b > a)
        reached = trace[-1] < 0.25 and len(trace) <= 50
        ok = ok and below_05 is not None and below_05 <= 10 and reached and rises <= 2
        details.append(
            f"alpha={alpha}: <0.5 at update {below_05}, <0.25 at update "
            f"{len(trace)}, {rises} non-monotone steps"
        )
    report("convergence", ok, "; ".join(details))


def test_apportionment_exhaustive():
    rng = np.random.default_rng(0)
    mismatches = 0
    bound_violations = 0
    for _ in range(1000):
        k = int(rng.integers(1, 11))
        masses = rng.random(k) + 1e-3
        n = int(rng.integers(1, 31))
        counts = apportion_counts(masses, n)
        oracle = largest_remainder_enumeration(masses, n)
        mismatches += counts.tolist() != oracle.tolist()
        fair = n * masses / masses.sum()
        bound_violations += int(np.any(np.abs(counts - fair) >= 1.0))
        bound_violations += int(counts.sum() != n)
    # every non-empty component receives at least one site
    grid, labels = spiral_labels((64, 64, 1))
    sites, rep = seed_sites(grid, labels, SeedingParams(alpha=10, seed=0))
    comps_with_sites = {s.component_id for s in sites}
    all_comps = {c.id for c in labels.component_table}
    report(
        "apportionment",
        mismatches == 0 and bound_violations == 0 and comps_with_sites == all_comps,
        f"1000 random mass vectors match the enumeration oracle "
        f"({mismatches} mismatches, {bound_violations} bound violations); "
        f"{len(all_comps)} components all seeded",
    )


def test_moment_merging_100_datasets():
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(64, 1024))
        scale = 10.0 ** rng.uniform(-2, 3)
        samples = rng.normal(rng.uniform(-5, 5) * scale, scale, size=(n, 2))
        flat = accumulate(samples)
        parts = [accumulate(samples[i::64]) for i in range(64)]
        while len(parts) > 1:
            i = int(rng.integers(len(parts) - 1))
            parts[i] = merge(parts.pop(i + 1), parts[i])
        tree = parts[0]
        for p in range(5):
            for q in range(5 - p):
                a = flat.sums[p, q]
                b = tree.sums[p, q]
                denom = max(abs(a), abs(b), 1e-300)
                worst = max(worst, abs(a - b) / denom)
    report(
        "moment-merging",
        worst < 1e-9,
        f"64-way random merge trees vs flat accumulation over 100 datasets: "
        f"worst relative difference {worst:.2e}",
    )


def test_gmm_em():
    rng = np.random.default_rng(5)
    s1 = rng.normal((2, -3), (1.5, 0.8), size=(600, 2))
    m1 = fit_gmm(s1, 1, seed=0)
    agg = accumulate(s1)
    mean_err = max(
        abs(m1.means[0][0] - comoment_mean(agg)[0]) / abs(comoment_mean(agg)[0]),
        abs(m1.means[0][1] - comoment_mean(agg)[1]) / abs(comoment_mean(agg)[1]),
    )
    cov = np.array(
        [[comoment(agg, 2, 0), comoment(agg, 1, 1)],
         [comoment(agg, 1, 1), comoment(agg, 0, 2)]]
    )
    cov_err = float(np.max(np.abs(m1.covs[0] - cov) / np.maximum(np.abs(cov), 1e-12)))

    s2 = np.concatenate(
        [rng.normal((-5, 0), 1, (500, 2)), rng.normal((5, 0), 1, (500, 2))]
    )
    m2 = fit_gmm(s2, 2, seed=3)
    centers = np.sort(m2.means[:, 0])
    recovery = max(abs(centers[0] + 5), abs(centers[1] - 5))

    monotone = all(
        b >= a - 1e-12 * max(abs(a), 1.0)
        for a, b in zip(m2.log_likelihood_trace, m2.log_likelihood_trace[1:])
    )
    ok = mean_err < 1e-6 and cov_err < 1e-6 and recovery < 0.2 and monotone
    report(
        "gmm-em",
        ok,
        f"k=1 moment errors (mean {mean_err:.2e}, cov {cov_err:.2e}); "
        f"two-cluster recovery off by {recovery:.3f}; "
        f"log-likelihood monotone={monotone}",
    )


def comoment_mean(agg):
    return (agg.sums[1, 0] / agg.n, agg.sums[0, 1] / agg.n)


def test_layout_roundtrip_and_reduction(tmp_path):
    grid, labels = spiral_labels((48, 48, 1))
    result = run_pipeline(
        grid, IsobandSpec("f", [0.3, 0.55, 0.8]),
        SeedingParams(alpha=40, seed=7), LloydParams(max_updates=4, ds_tolerance=0.1),
    )
    path = tmp_path / "acc.lrcvt"
    summary = export_layout(result, path)
    reader = LayoutReader(path)
    rec = reader.all_records()

    nx, ny, _ = grid.dims
    vox = rec["x"].astype(np.int64) + nx * (
        rec["y"].astype(np.int64) + ny * rec["z"].astype(np.int64)
    )
    bit_exact = all(
        np.array_equal(rec[f"f{i}"], grid.fields[name][vox])
        for i, name in enumerate(grid.field_names())
    )

    slices_equal = all(
        np.array_equal(
            reader.component_records(c.id),
            rec[c.first_record : c.first_record + c.record_count],
        )
        for c in reader.header.components
    )

    est = summary["estimate_elements"]
    accounting = (
        summary["n"] * (summary["m"] + 1)
        - summary["r"] * (summary["m"] + 1)
        + summary["n_layers"]
        + summary["n_components"]
    )
    data_bytes_ok = (
        summary["data_bytes"]
        == summary["r"] * record_dtype(summary["m"]).itemsize
        == reader._offsets["agg"] - reader._offsets["data"]
    )

    m100_single_slot = 1 / (100 + 1)
    m100_bytes3 = 12 / (12 + 4 * 100)
    ok = (
        bit_exact and slices_equal and est == accounting and data_bytes_ok
        and m100_single_slot <= 0.02
    )
    report(
        "layout",
        ok,
        f"bit-exact round trip={bit_exact}; contiguous reads equal slices="
        f"{slices_equal}; estimate {est} == element accounting {accounting}; "
        f"m=100 coordinate overhead {m100_single_slot:.3%} single-slot "
        f"(file stores 3 u32 indices: {m100_bytes3:.3%})",
    )


def test_fold_metric_and_all_pairs():
    # connected-pair bounds + Floyd-Warshall agreement on the spiral
    grid, labels = spiral_labels((64, 64, 1))
    tess, _ = lrcvt(
        grid, labels, SeedingParams(alpha=60, seed=3),
        LloydParams(max_updates=3, ds_tolerance=0.1),
    )
    graph = region_adjacency(tess)
    paths = all_pairs_paths(graph)
    fw = floyd_warshall(graph.n_sites, graph.edges, graph.weights)
    fw_match = np.allclose(paths, fw, rtol=1e-12, atol=1e-12)
    fm = fold_metric(graph.positions, paths, c=1.0)
    connected = np.isfinite(paths) & (paths > 0)
    bounds_ok = bool(np.all(fm.matrix[connected] <= 1.0 + 1e-9))
    cross = ~np.isfinite(paths)
    np.fill_diagonal(cross, False)
    cross_ok = bool(np.all(fm.matrix[cross] == 1.0)) if cross.any() else True

    # canonical U: tips are Euclid-close but path-far
    grid_u, labels_u = horseshoe_labels((64, 64, 1), iso=(0.0, 0.12))
    dense, _ = lrcvt(
        grid_u, labels_u, SeedingParams(alpha=24, seed=1),
        LloydParams(max_updates=4, ds_tolerance=0.1),
    )
    gu = region_adjacency(dense)
    du = all_pairs_paths(gu)
    fu = fold_metric(gu.positions, du, c=1.0)
    tips = np.array([(32 - 14.08, 9.0, 0.5), (32 + 14.08, 9.0, 0.5)])
    a = int(np.argmin(np.linalg.norm(gu.positions - tips[0], axis=1)))
    b = int(np.argmin(np.linalg.norm(gu.positions - tips[1], axis=1)))
    tip_fold = float(fu.matrix[a, b])

    ok = fw_match and bounds_ok and cross_ok and tip_fold < 0.3
    report(
        "fold-metric",
        ok,
        f"all-pairs == Floyd-Warshall: {fw_match}; connected entries <= 1+1e-9: "
        f"{bounds_ok}; disconnected == c: {cross_ok}; U tip pair fold "
        f"{tip_fold:.3f} < 0.3 (regression baseline)",
    )


def test_determinism_across_thread_counts(tmp_path):
    import numba

    def build(tag):
        grid, _ = spiral_labels((48, 48, 1))
        result = run_pipeline(
            grid, IsobandSpec("f", [0.3, 0.55, 0.8]),
            SeedingParams(alpha=40, seed=9),
            LloydParams(max_updates=4, ds_tolerance=0.05),
        )
        path = tmp_path / f"det_{tag}.lrcvt"
        export_layout(result, path)
        reader = LayoutReader(path)
        aggs = [
            b.as_moments() for b in reader.aggregates
            if b.scope == "component" and b.as_moments().variable_pair() == ("f", "g")
        ]
        emb = embed(featurize(aggs), method="mds", seed=0)
        return path.read_bytes(), result.tess, json.dumps(emb.to_payload())

    old = numba.get_num_threads()
    try:
        numba.set_num_threads(1)
        bytes1, tess1, emb1 = build("t1")
        numba.set_num_threads(numba.config.NUMBA_NUM_THREADS)
        bytes2, tess2, emb2 = build("tmax")
    finally:
        numba.set_num_threads(old)

    ok = (
        bytes1 == bytes2
        and np.array_equal(tess1.site_of, tess2.site_of)
        and np.array_equal(tess1.dist, tess2.dist)
        and emb1 == emb2
    )
    report(
        "determinism",
        ok,
        f"layout file bytes ({len(bytes1)}), tessellation arrays, and mds "
        f"projection identical across thread counts",
    )


def test_path_audit_on_fixtures():
    # companion to the sandwich: every path invariant audited end to end
    ok = True
    details = []
    for name, make, alpha, seed in FIXTURES[:3]:
        grid, labels = make()
        tess, _ = lrcvt(
            grid, labels, SeedingParams(alpha=alpha, seed=seed),
            LloydParams(max_updates=3, ds_tolerance=0.1),
        )
        aud = audit_tessellation(tess, labels)
        clean = all(
            aud[k] == 0
            for k in (
                "restriction_violations", "broken_chains", "chain_site_mismatch",
                "euclid_bound_violations", "segment_violations",
            )
        ) and aud["chain_depth_ok"]
        ok = ok and clean
        details.append(f"{name}: {'clean' if clean else aud}")
    report("path-audit", ok, "; ".join(details))
