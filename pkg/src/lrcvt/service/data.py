"""Dataset facade over a .lrcvt file for the exploration service.

Indexes, region tables, and aggregates load eagerly (they are small); voxel
records load per component on first touch. Projections are computed lazily
per (level, metric, method) and cached; the dataset itself is immutable and
safe to share across sessions.
"""

from __future__ import annotations

import numpy as np

from ..grid import NONE_ID
from ..layout import AGG_MOMENTS, LayoutReader
from ..projection import embed, featurize
from ..sitegraph import all_pairs_paths, fold_metric, region_adjacency
from ..stats import MomentAggregate, comoment
from ..tessellation import Tessellation
from ..seeding import Site
from .state import ServiceError

SMALL_COMPONENT_THRESHOLD = 30  # voxels; below this, stats render gray


class Dataset:
    def __init__(self, path, small_threshold: int = SMALL_COMPONENT_THRESHOLD):
        self.reader = LayoutReader(path)
        self.header = self.reader.header
        self.small_threshold = small_threshold
        self._records_cache: dict[int, np.ndarray] = {}
        self._projection_cache: dict[tuple, list[dict]] = {}
        self._sitegraph = None
        self._fold = None

        h = self.header
        self.n_records = h.n_records
        self.field_names = h.field_names
        # voxel id == record index; map each record to its region/component
        self.region_of = np.full(h.n_records, NONE_ID, dtype=np.int64)
        for reg in h.regions:
            self.region_of[reg.first_record : reg.first_record + reg.record_count] = (
                reg.site_id
            )
        self.component_of = np.full(h.n_records, NONE_ID, dtype=np.int64)
        for comp in h.components:
            self.component_of[
                comp.first_record : comp.first_record + comp.record_count
            ] = comp.id
        self.comp_of_region = np.array(
            [r.component_id for r in h.regions], dtype=np.int64
        )

        # moment aggregates keyed by (scope, id, x, y)
        self.moments: dict[tuple, MomentAggregate] = {}
        for blob in self.reader.aggregates:
            if blob.kind != AGG_MOMENTS:
                continue
            agg = blob.as_moments()
            self.moments[(blob.scope, blob.scope_id, agg.x_name, agg.y_name)] = agg

    # -- ids and nesting ----------------------------------------------------

    def id_exists(self, level: str, i: int) -> bool:
        if level == "component":
            return 0 <= i < len(self.header.components)
        if level == "region":
            return 0 <= i < len(self.header.regions)
        if level == "voxel":
            return 0 <= i < self.n_records
        return False

    def parent_id(self, level: str, i: int) -> int:
        if level == "region":
            return int(self.comp_of_region[i])
        if level == "voxel":
            return int(self.region_of[i])
        raise ServiceError(400, "bad_level", f"level '{level}' has no parent")

    # -- record access ------------------------------------------------------

    def component_records(self, cid: int) -> np.ndarray:
        if cid not in self._records_cache:
            self._records_cache[cid] = self.reader.component_records(cid)
        return self._records_cache[cid]

    def record_rows(self, record_ids: np.ndarray) -> np.ndarray:
        """Arbitrary records by id, loading whole components as needed."""
        out = np.empty(record_ids.size, dtype=self.reader._dtype)
        for cid in np.unique(self.component_of[record_ids]):
            entry = self.reader.component_entry(int(cid))
            mask = self.component_of[record_ids] == cid
            local = record_ids[mask] - entry.first_record
            out[mask] = self.component_records(int(cid))[local]
        return out

    def scope_record_ids(self, selections: dict[str, list[int]]) -> np.ndarray:
        """Record ids of the deepest non-empty selection level; the whole
        dataset when nothing is selected."""
        if selections.get("voxel"):
            return np.array(sorted(selections["voxel"]), dtype=np.int64)
        if selections.get("region"):
            parts = [
                np.arange(
                    self.header.regions[r].first_record,
                    self.header.regions[r].first_record
                    + self.header.regions[r].record_count,
                )
                for r in selections["region"]
            ]
            return np.sort(np.concatenate(parts)) if parts else np.empty(0, np.int64)
        if selections.get("component"):
            parts = [
                np.arange(
                    self.header.components[c].first_record,
                    self.header.components[c].first_record
                    + self.header.components[c].record_count,
                )
                for c in selections["component"]
            ]
            return np.sort(np.concatenate(parts)) if parts else np.empty(0, np.int64)
        return np.arange(self.n_records, dtype=np.int64)

    def parent_scope_record_ids(self, selections: dict[str, list[int]]) -> np.ndarray:
        """Record ids one hierarchy level above the effective scope (the
        context data drawn behind the foreground layer)."""
        if selections.get("voxel"):
            return self.scope_record_ids({"region": selections.get("region", [])} |
                                         {"component": selections.get("component", [])})
        if selections.get("region"):
            return self.scope_record_ids({"component": selections.get("component", [])})
        return np.arange(self.n_records, dtype=np.int64)

    def samples(self, record_ids: np.ndarray, names: list[str]) -> np.ndarray:
        rows = self.record_rows(record_ids)
        cols = [
            rows[f"f{self.field_names.index(n)}"].astype(np.float64) for n in names
        ]
        return np.stack(cols, axis=1)

    def field_pair_default(self) -> tuple[str, str]:
        names = self.field_names
        if len(names) >= 2:
            return names[0], names[1]
        return names[0], names[0]

    # -- hierarchy and projections -------------------------------------------

    def hierarchy(self) -> dict:
        layers = []
        for li, le in enumerate(self.header.layers):
            iso = self.header.iso_values
            comps = [
                {
                    "id": c.id,
                    "voxels": c.record_count,
                    "gray": c.record_count < self.small_threshold,
                    "bbox": list(c.bbox),
                    "regions": c.region_count,
                }
                for c in self.header.components
                if c.layer == li
            ]
            layers.append(
                {
                    "layer": li,
                    "iso": [iso[li], iso[li + 1]] if li + 1 < len(iso) else None,
                    "records": le.record_count,
                    "components": comps,
                }
            )
        return {"layers": layers, "field": self.header.iso_field}

    def component_metric(self, x: str, y: str, moment: str = "mu_22") -> dict[int, float]:
        """Tree-view color metric per component (NaN when absent)."""
        out = {}
        if not (len(moment) == 5 and moment.startswith("mu_")
                and moment[3:].isdigit()):
            raise ServiceError(404, "bad_moment", f"unknown moment '{moment}'")
        p, q = int(moment[3]), int(moment[4])
        for c in self.header.components:
            agg = self.moments.get(("component", c.id, x, y))
            if agg is None or agg.n < 1:
                out[c.id] = float("nan")
            else:
                out[c.id] = comoment(agg, p, q)
        return out

    def _tessellation_view(self) -> Tessellation:
        """Rebuild the per-voxel site/component maps from the records (the
        file is self-contained) for adjacency work."""
        nx, ny, nz = self.header.dims
        n = nx * ny * nz
        site_of = np.full(n, NONE_ID, dtype=np.int32)
        component = np.full(n, NONE_ID, dtype=np.int32)
        rec = self.reader.all_records()
        vox = rec["x"].astype(np.int64) + nx * (
            rec["y"].astype(np.int64) + ny * rec["z"].astype(np.int64)
        )
        site_of[vox] = self.region_of
        component[vox] = self.component_of
        sites = [
            Site(position=r.position, component_id=r.component_id)
            for r in self.header.regions
        ]
        dummy = np.empty(0)
        return Tessellation(
            dims=tuple(self.header.dims),
            spacing=tuple(self.header.spacing),
            site_of=site_of,
            dist=dummy,
            src=np.empty(0, dtype=np.int32),
            state=np.empty(0, dtype=np.uint8),
            component=component,
            sites=sites,
        )

    def fold_distance_matrix(self, c: float = 1.0, invert: bool = True) -> np.ndarray:
        """Pairwise embedding input from the fold metric. By default the fold
        value f is mapped to 1 - f (straight-running neighbors embed close);
        invert=False uses f directly as the distance."""
        if self._fold is None:
            graph = region_adjacency(self._tessellation_view())
            paths = all_pairs_paths(graph)
            self._fold = fold_metric(graph.positions, paths, c=c)
        d = self._fold.matrix
        out = (1.0 - d) if invert else d.copy()
        np.fill_diagonal(out, 0.0)
        return np.abs(out)

    def projection(
        self,
        level: str,
        method: str = "mds",
        metric: str = "stats",
        x: str | None = None,
        y: str | None = None,
        seed: int = 0,
        invert_fold: bool = True,
    ) -> list[dict]:
        if level not in ("component", "region"):
            raise ServiceError(404, "bad_level", f"no projection for level '{level}'")
        x0, y0 = self.field_pair_default()
        x = x or x0
        y = y or y0
        key = (level, method, metric, x, y, seed, invert_fold)
        if key in self._projection_cache:
            return self._projection_cache[key]

        if metric == "spatial":
            if level != "region":
                raise ServiceError(
                    400, "bad_metric", "spatial projection applies to regions"
                )
            dist = self.fold_distance_matrix(invert=invert_fold)
            ids = list(range(len(self.header.regions)))
            emb = embed(dist, method=method, seed=seed, ids=ids, input_kind="distance")
        else:
            if level == "component":
                items = [
                    self.moments.get(("component", c.id, x, y))
                    for c in self.header.components
                ]
                ids = [c.id for c in self.header.components]
            else:
                items = [
                    self.moments.get(("region", r.site_id, x, y))
                    for r in self.header.regions
                ]
                ids = [r.site_id for r in self.header.regions]
            missing = [i for i, a in zip(ids, items) if a is None]
            if missing:
                raise ServiceError(
                    404, "no_aggregates",
                    f"no ({x},{y}) aggregates for {level}s {missing[:5]}; "
                    "re-export with aggregation",
                )
            keep = [(i, a) for i, a in zip(ids, items) if a.n > 0]
            if len(keep) < 2:
                raise ServiceError(400, "too_few_items", "need at least 2 items")
            ids = [i for i, _ in keep]
            feats = featurize([a for _, a in keep])
            emb = embed(feats, method=method, seed=seed, ids=ids)

        payload = emb.to_payload()
        for row in payload:
            if level == "component":
                c = self.header.components[row["id"]]
                row["layer"] = c.layer
                row["gray"] = c.record_count < self.small_threshold
            else:
                r = self.header.regions[row["id"]]
                comp = self.header.components[r.component_id]
                row["component"] = r.component_id
                row["layer"] = comp.layer
                row["gray"] = r.record_count < self.small_threshold
        self._projection_cache[key] = payload
        return payload

    def voxel_detail(self, record_ids: np.ndarray, limit: int = 5000) -> list[dict]:
        ids = record_ids[:limit]
        rows = self.record_rows(ids)
        out = []
        for i, rid in enumerate(ids):
            rec = rows[i]
            out.append(
                {
                    "id": int(rid),
                    "coords": [int(rec["x"]), int(rec["y"]), int(rec["z"])],
                    "region": int(self.region_of[rid]),
                    "component": int(self.component_of[rid]),
                    "values": {
                        n: float(rec[f"f{j}"]) for j, n in enumerate(self.field_names)
                    },
                }
            )
        return out
