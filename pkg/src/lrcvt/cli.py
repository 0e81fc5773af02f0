"""Batch driver: synthesize volumes, tessellate, aggregate, persist, validate,
project, and launch the exploration service.

Every subcommand is deterministic for a fixed --seed; --threads changes only
wall time, never output. A JSON config file may supply any flag default.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .grid import (
    SYNTH_KINDS,
    IsobandSpec,
    classify_isobands,
    label_components,
    load_volume,
    save_volume,
    synth_field,
    VoxelGrid,
)
from .layout import LayoutReader, load_component, reduction_estimate
from .pipeline import export_layout, run_pipeline
from .seeding import SeedingParams, Site
from .tessellation import (
    LloydParams,
    audit_tessellation,
    geodesic_oracle,
    voronoi_classify,
)


def _dims(text: str) -> tuple[int, int, int]:
    parts = [int(p) for p in text.replace("x", ",").split(",")]
    if len(parts) == 2:
        parts.append(1)
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"dims need 2 or 3 integers, got '{text}'")
    return tuple(parts)


def _floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",")]


def _pairs(text: str) -> list[tuple[str, str]]:
    out = []
    for part in text.split(","):
        a, _, b = part.partition(":")
        out.append((a, b or a))
    return out


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lrcvt", description=__doc__)
    ap.add_argument("--config", help="JSON file supplying flag defaults")
    ap.add_argument("--threads", type=int, help="worker threads (numba)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic volume")
    p.add_argument("--kind", choices=SYNTH_KINDS, required=True)
    p.add_argument("--dims", type=_dims, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="metadata JSON path")

    p = sub.add_parser("tessellate", help="run the restricted CVT and export")
    p.add_argument("--volume", required=True, help="volume metadata JSON")
    p.add_argument("--field", required=True, help="level-set field name")
    p.add_argument("--iso", type=_floats, required=True, help="iso values, comma separated")
    p.add_argument("--alpha", type=float, default=100.0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--weight-field", default=None)
    p.add_argument("--block-size", type=int, default=16)
    p.add_argument("--ds-tol", type=float, default=0.25)
    p.add_argument("--max-updates", type=int, default=50)
    p.add_argument("--blocks", type=_dims, default=(1, 1, 1))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--pairs", type=_pairs, default=None, help="x:y,... aggregate pairs")
    p.add_argument("--no-aggregates", action="store_true")
    p.add_argument("-o", "--out", required=True, help=".lrcvt output path")

    p = sub.add_parser("aggregate", help="recompute aggregates in a layout file")
    p.add_argument("--in", dest="path", required=True)
    p.add_argument("--pairs", type=_pairs, default=None)

    p = sub.add_parser("export", help="export the JSON index manifest")
    p.add_argument("--in", dest="path", required=True)
    p.add_argument("-o", "--out", default=None, help="manifest path")

    p = sub.add_parser("inspect", help="print a layout file summary")
    p.add_argument("--in", dest="path", required=True)

    p = sub.add_parser("load", help="load one component's records")
    p.add_argument("--in", dest="path", required=True)
    p.add_argument("--component", type=int, required=True)
    p.add_argument("-o", "--out", default=None, help="write records to .npz")

    p = sub.add_parser("validate", help="run the oracle validation suites")
    p.add_argument(
        "--against", choices=("dijkstra", "euclidean", "all"), default="all"
    )
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("project", help="compute a 2D embedding from a layout file")
    p.add_argument("--in", dest="path", required=True)
    p.add_argument("--level", choices=("component", "region"), default="component")
    p.add_argument("--method", choices=("mds", "tsne"), default="mds")
    p.add_argument("--metric", choices=("stats", "spatial"), default="stats")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", default=None, help="embedding JSON path")

    p = sub.add_parser("serve", help="serve the exploration API")
    p.add_argument("--in", dest="path", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8040)
    p.add_argument("--static", default=None, help="frontend asset directory")
    p.add_argument("--small-threshold", type=int, default=30)

    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    if "--config" in argv:
        i = argv.index("--config")
        cfg = json.loads(Path(argv[i + 1]).read_text())
        known = {a.dest for sp in ap._subparsers._group_actions
                 for p in sp.choices.values() for a in p._actions}
        defaults = {k: v for k, v in cfg.items() if k in known}
        for sp_action in ap._subparsers._group_actions:
            for p in sp_action.choices.values():
                p.set_defaults(**{k: v for k, v in defaults.items()
                                  if any(a.dest == k for a in p._actions)})
    return argv


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    ap = build_parser()
    _apply_config(ap, argv)
    args = ap.parse_args(argv)
    if args.threads:
        import numba

        numba.set_num_threads(args.threads)
    try:
        return _dispatch(args)
    except BrokenPipeError:
        return 1
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _dispatch(args) -> int:
    if args.command == "synth":
        grid = synth_field(args.kind, args.dims, args.seed)
        path = save_volume(grid, args.out)
        print(f"wrote {path} ({args.kind}, dims={grid.dims})")
        return 0

    if args.command == "tessellate":
        grid = load_volume(args.volume)
        iso = IsobandSpec(args.field, args.iso)
        seeding = SeedingParams(
            alpha=args.alpha, gamma=args.gamma, weight_field=args.weight_field,
            block_size=args.block_size, seed=args.seed,
        )
        lloyd = LloydParams(max_updates=args.max_updates, ds_tolerance=args.ds_tol)
        result = run_pipeline(grid, iso, seeding, lloyd, blocks=args.blocks)
        print("update,mean_ds")
        for i, ds in enumerate(result.trace, start=1):
            print(f"{i},{ds:.8f}")
        summary = export_layout(
            result, args.out, pairs=args.pairs,
            with_aggregates=not args.no_aggregates,
        )
        print(
            f"wrote {args.out}: {summary['r']} records, "
            f"{summary['n_components']} components, "
            f"{summary['n_regions']} regions, "
            f"estimate {summary['estimate_elements']} elements saved",
            file=sys.stderr,
        )
        return 0

    if args.command == "aggregate":
        reader = LayoutReader(args.path)
        pairs = args.pairs or _default_pairs(reader.header.field_names)
        blobs = _aggregate_from_file(reader, pairs)
        _rewrite_aggregates(args.path, reader, blobs)
        print(f"rewrote {args.path} with {len(blobs)} aggregate blobs")
        return 0

    if args.command == "export":
        reader = LayoutReader(args.path)
        out = args.out or f"{args.path}.manifest.json"
        from .layout import _manifest_dict

        Path(out).write_text(
            json.dumps(_manifest_dict(reader.header, reader.aggregates), indent=1)
        )
        print(f"wrote {out}")
        return 0

    if args.command == "inspect":
        reader = LayoutReader(args.path)
        h = reader.header
        n = int(np.prod(h.dims))
        m = h.n_fields
        est = reduction_estimate(n, h.n_records, m, len(h.layers), len(h.components))
        print(f"dims {h.dims} spacing {h.spacing}")
        print(f"fields {h.field_names} iso {h.iso_field}={h.iso_values}")
        print(
            f"layers {len(h.layers)} components {len(h.components)} "
            f"regions {len(h.regions)} records {h.n_records}"
        )
        print(f"reduction estimate: {est} elements saved of {n * (m + 1)}")
        print(
            f"coordinate overhead: {1 / (m + 1):.4f} (single slot), "
            f"{12 / (12 + 4 * m):.4f} (3x u32 bytes)"
        )
        for li, e in enumerate(h.layers):
            print(f"  layer {li}: records [{e.first_record}, {e.first_record + e.record_count})")
        for c in h.components[:20]:
            print(
                f"  component {c.id} (layer {c.layer}): {c.record_count} records, "
                f"{c.region_count} regions, bbox {c.bbox}"
            )
        if len(h.components) > 20:
            print(f"  ... {len(h.components) - 20} more components")
        return 0

    if args.command == "load":
        data = load_component(args.path, args.component)
        e = data["entry"]
        print(
            f"component {e.id}: {e.record_count} records, "
            f"{len(data['regions'])} regions, {len(data['aggregates'])} aggregates"
        )
        if args.out:
            rec = data["records"]
            np.savez(
                args.out,
                coords=np.stack([rec["x"], rec["y"], rec["z"]], axis=1),
                **{
                    f"field_{i}": rec[f"f{i}"]
                    for i in range(len(rec.dtype.names) - 3)
                },
            )
            print(f"wrote {args.out}")
        return 0

    if args.command == "validate":
        failures = run_validation(args.against, args.seed)
        return 1 if failures else 0

    if args.command == "project":
        from .service.data import Dataset

        ds = Dataset(args.path)
        points = ds.projection(args.level, method=args.method, metric=args.metric,
                               seed=args.seed)
        text = json.dumps(points, indent=1)
        if args.out:
            Path(args.out).write_text(text)
            print(f"wrote {args.out} ({len(points)} points)")
        else:
            print(text)
        return 0

    if args.command == "serve":
        import uvicorn

        from .service.app import create_app
        from .service.data import Dataset

        ds = Dataset(args.path, small_threshold=args.small_threshold)
        app = create_app(ds, static_dir=args.static)
        uvicorn.run(app, host=args.host, port=args.port, log_level="info")
        return 0

    raise ValueError(f"unhandled command {args.command}")


def _default_pairs(names: list[str]) -> list[tuple[str, str]]:
    return [(a, b) for i, a in enumerate(names) for b in names[i:]]


def _aggregate_from_file(reader: LayoutReader, pairs):
    """Aggregates recomputed from the records already in the file (the layout
    is self-contained)."""
    from .layout import AggregateBlob
    from .stats import MomentAggregate, accumulate, merge

    h = reader.header
    rec = reader.all_records()
    blobs = []
    layer_of_comp = {c.id: c.layer for c in h.components}
    for x_name, y_name in pairs:
        fx = reader.field_column(rec, x_name).astype(np.float64)
        fy = reader.field_column(rec, y_name).astype(np.float64)
        comp_aggs: dict[int, MomentAggregate] = {
            c.id: MomentAggregate(x_name=x_name, y_name=y_name) for c in h.components
        }
        for reg in h.regions:
            sl = slice(reg.first_record, reg.first_record + reg.record_count)
            agg = accumulate(np.stack([fx[sl], fy[sl]], axis=1), x_name, y_name)
            blobs.append(AggregateBlob.moments("region", reg.site_id, agg))
            comp_aggs[reg.component_id] = merge(comp_aggs[reg.component_id], agg)
        for c in h.components:
            # records not claimed by any region (components with no sites)
            claimed = sum(
                r.record_count for r in reader.component_regions(c.id)
            )
            if claimed < c.record_count:
                sl = slice(c.first_record + claimed, c.first_record + c.record_count)
                agg = accumulate(np.stack([fx[sl], fy[sl]], axis=1), x_name, y_name)
                comp_aggs[c.id] = merge(comp_aggs[c.id], agg)
            blobs.append(AggregateBlob.moments("component", c.id, comp_aggs[c.id]))
        for li in range(len(h.layers)):
            agg = MomentAggregate(x_name=x_name, y_name=y_name)
            for cid, a in comp_aggs.items():
                if layer_of_comp[cid] == li:
                    agg = merge(agg, a)
            blobs.append(AggregateBlob.moments("layer", li, agg))
    return blobs


def _rewrite_aggregates(path, reader: LayoutReader, blobs):
    """Replace the aggregate section (it is the final section of the file)."""
    import struct

    from .layout import SCOPES

    agg_off = reader._offsets["agg"]
    with open(path, "r+b") as f:
        f.truncate(agg_off)
        f.seek(agg_off)
        f.write(struct.pack("<I", len(blobs)))
        for a in blobs:
            f.write(
                struct.pack(
                    "<BIIQ", SCOPES.index(a.scope), a.scope_id, a.kind, len(a.payload)
                )
            )
            f.write(a.payload)


# ---------------------------------------------------------------------------
# Oracle validation


def _check(name: str, ok: bool, detail: str, failures: list[str]):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}: {detail}")
    if not ok:
        failures.append(name)


def run_validation(against: str, seed: int) -> list[str]:
    failures: list[str] = []

    if against in ("euclidean", "all"):
        nx, ny = 48, 36
        f = np.full(nx * ny, 0.5, dtype=np.float32)
        grid = VoxelGrid((nx, ny, 1), (1, 1, 1), {"f": f})
        labels = label_components(classify_isobands(grid, IsobandSpec("f", [0.0, 1.0])))
        rng = np.random.default_rng(seed + 3)
        vox = rng.choice(nx * ny, 25, replace=False)
        sites = [
            Site(((v % nx) + 0.5, ((v // nx) % ny) + 0.5, 0.5), 0) for v in vox
        ]
        tess = voronoi_classify(grid, labels, sites)
        centers = grid.voxel_centers()
        d = np.linalg.norm(
            centers[:, None, :] - np.array([s.position for s in sites])[None], axis=2
        )
        brute = d.argmin(axis=1)
        match = float(np.mean(brute == tess.site_of))
        _check(
            "euclidean-convex-exactness", match == 1.0,
            f"{match * 100:.2f}% voxels match brute-force nearest site", failures,
        )
        exact = np.allclose(tess.dist, d.min(axis=1))
        _check(
            "euclidean-distances", exact,
            "distances equal straight-line distance on a convex component", failures,
        )

    if against in ("dijkstra", "all"):
        grid = synth_field("horseshoe", (64, 64, 1), 0)
        labels = label_components(classify_isobands(grid, IsobandSpec("f", [0.0, 0.12])))
        nx, ny, nz = labels.dims
        tips = [(32 - 14.08, 9.0, 0.5), (32 + 14.08, 9.0, 0.5)]
        sites = []
        for t in tips:
            v = int(t[0]) + nx * (int(t[1]) + ny * int(t[2]))
            sites.append(Site(t, int(labels.component[v])))
        tess = voronoi_classify(grid, labels, sites)
        aud = audit_tessellation(tess, labels)
        _check(
            "path-invariants",
            all(
                aud[k] == 0
                for k in (
                    "restriction_violations", "broken_chains", "chain_site_mismatch",
                    "euclid_bound_violations", "segment_violations",
                )
            ),
            f"{aud}",
            failures,
        )
        oracle = []
        for t in tips:
            v = int(t[0]) + nx * (int(t[1]) + ny * int(t[2]))
            off = float(
                np.hypot(np.hypot(v % nx + 0.5 - t[0], (v // nx) % ny + 0.5 - t[1]), 0.0)
            )
            oracle.append(geodesic_oracle(labels, v, (1, 1, 1), off))
        oracle = np.vstack(oracle)
        assigned = np.nonzero(tess.site_of >= 0)[0]
        upper = oracle[tess.site_of[assigned], assigned]
        ok_hi = bool(np.all(tess.dist[assigned] <= upper + 1e-6))
        _check(
            "distance-sandwich", ok_hi,
            f"max overshoot {float(np.max(tess.dist[assigned] - upper)):.2e}", failures,
        )
        agree = float(np.mean(oracle.argmin(axis=0)[assigned] == tess.site_of[assigned]))
        _check(
            "dijkstra-agreement", agree >= 0.95,
            f"{agree * 100:.2f}% voxels agree with the shortest-path oracle", failures,
        )

    print(f"{'all checks passed' if not failures else f'{len(failures)} check(s) failed'}")
    return failures


if __name__ == "__main__":
    sys.exit(main())
