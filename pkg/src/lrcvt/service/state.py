"""Session state: hierarchical selections and plot configuration.

Selections exist at three nested levels (component, region, voxel); a child
selection is always a subset of the currently selected parents, and every
mutation re-prunes the levels below it.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

LEVELS = ("component", "region", "voxel")
SET_OPS = ("new", "union", "intersect", "difference")


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class PlotConfig:
    mode: str = "hist2d"
    x: str = ""
    y: str = ""
    x_range: list[float] | None = None
    y_range: list[float] | None = None
    locked: bool = False
    bins: int = 48
    k: int = 3  # mixture components when mode == "gmm"


@dataclass
class SessionState:
    selections: dict[str, list[int]] = field(
        default_factory=lambda: {lvl: [] for lvl in LEVELS}
    )
    plot: PlotConfig = field(default_factory=PlotConfig)
    cached_plot: dict | None = None
    lock: threading.Lock = field(default_factory=threading.Lock)

    def snapshot(self) -> dict:
        return {
            "selections": {lvl: list(ids) for lvl, ids in self.selections.items()},
            "plot": {
                "mode": self.plot.mode,
                "x": self.plot.x,
                "y": self.plot.y,
                "x_range": self.plot.x_range,
                "y_range": self.plot.y_range,
                "locked": self.plot.locked,
                "bins": self.plot.bins,
                "k": self.plot.k,
            },
        }


def _apply_op(existing: list[int], ids: list[int], op: str) -> list[int]:
    """Ordered set algebra: results keep the existing order, with unions
    appending new ids in request order."""
    incoming = list(dict.fromkeys(ids))
    if op == "new":
        return incoming
    have = set(existing)
    want = set(incoming)
    if op == "union":
        return existing + [i for i in incoming if i not in have]
    if op == "intersect":
        return [i for i in existing if i in want]
    if op == "difference":
        return [i for i in existing if i not in want]
    raise ServiceError(400, "bad_op", f"unknown set operation '{op}'")


def apply_selection(
    state: SessionState, level: str, ids: list[int], op: str, dataset
) -> dict:
    """Run one selection mutation and re-prune the child levels.

    Raises 404 for unknown ids, 409 when the requested ids fall outside the
    currently selected parents. Returns the new selections plus the child ids
    pruned as a consequence.
    """
    if level not in LEVELS:
        raise ServiceError(404, "bad_level", f"unknown selection level '{level}'")
    if op not in SET_OPS:
        raise ServiceError(400, "bad_op", f"unknown set operation '{op}'")
    unknown = [i for i in ids if not dataset.id_exists(level, i)]
    if unknown:
        raise ServiceError(
            404, "unknown_ids", f"unknown {level} ids: {unknown[:10]}"
        )
    # ids must nest under the currently selected parents (except difference,
    # which can only shrink the selection)
    if op != "difference":
        parent = _parent_level(level)
        if parent is not None:
            allowed = set(state.selections[parent])
            outside = [
                i for i in ids if dataset.parent_id(level, i) not in allowed
            ]
            if outside:
                raise ServiceError(
                    409,
                    "nesting_violation",
                    f"{level} ids {outside[:10]} are outside the selected {parent}s",
                )

    state.selections[level] = _apply_op(state.selections[level], ids, op)
    pruned = _prune_children(state, level, dataset)
    return {"selections": state.snapshot()["selections"], "pruned": pruned}


def _parent_level(level: str) -> str | None:
    i = LEVELS.index(level)
    return LEVELS[i - 1] if i > 0 else None


def _prune_children(state: SessionState, level: str, dataset) -> dict[str, list[int]]:
    pruned: dict[str, list[int]] = {}
    for child_i in range(LEVELS.index(level) + 1, len(LEVELS)):
        child = LEVELS[child_i]
        parent = LEVELS[child_i - 1]
        allowed = set(state.selections[parent])
        keep, drop = [], []
        for i in state.selections[child]:
            (keep if dataset.parent_id(child, i) in allowed else drop).append(i)
        state.selections[child] = keep
        pruned[child] = drop
    return pruned
