"""Featurization and 2D embeddings for the linked projection views.

Items (components or regions) are featurized from their moment aggregates or
histogram bins, standardized per dimension, and embedded with classical MDS
(deterministic; the test-stable default) or exact t-SNE (seeded). Embeddings
can also be computed straight from a precomputed distance matrix, e.g. the
fold metric.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .stats import Histogram1D, Histogram2D, MomentAggregate, comoment, mean_xy


@dataclass
class FeatureMatrix:
    values: np.ndarray  # (n_items, n_dims), standardized
    dims: list[str]
    dropped: list[str] = field(default_factory=list)  # zero-variance dims


@dataclass
class Embedding2D:
    coords: np.ndarray  # (n_items, 2)
    method: str
    seed: int
    ids: list[int] = field(default_factory=list)

    def to_payload(self) -> list[dict]:
        ids = self.ids if self.ids else list(range(self.coords.shape[0]))
        return [
            {"id": int(i), "x": float(p[0]), "y": float(p[1])}
            for i, p in zip(ids, self.coords)
        ]


def _stat_value(agg: MomentAggregate, name: str) -> float:
    if agg.n < 1:
        raise ValueError("aggregate with no samples cannot be featurized")
    if name == "n":
        return float(agg.n)
    if name == "mean_x":
        return mean_xy(agg)[0]
    if name == "mean_y":
        return mean_xy(agg)[1]
    if name == "var_x":
        return comoment(agg, 2, 0)
    if name == "var_y":
        return comoment(agg, 0, 2)
    if name == "cov":
        return comoment(agg, 1, 1)
    if name.startswith("mu_") and len(name) == 5:
        return comoment(agg, int(name[3]), int(name[4]))
    raise KeyError(f"unknown statistic '{name}' in featurization recipe")

DEFAULT_RECIPE = ["mean_x", "mean_y", "var_x", "var_y", "cov", "mu_22"]


def featurize(items: list, recipe: list[str] | None = None) -> FeatureMatrix:
    """Standardized feature vectors, one per item.

    Items are either moment aggregates (recipe = statistic names) or
    histograms (feature = normalized bin values; recipe ignored). Dimensions
    with zero variance across items are dropped and recorded.
    """
    if not items:
        raise ValueError("no items to featurize")
    if isinstance(items[0], (Histogram1D, Histogram2D)):
        rows = []
        for h in items:
            counts = h.counts.astype(np.float64).ravel()
            total = counts.sum()
            rows.append(counts / total if total > 0 else counts)
        raw = np.stack(rows)
        dims = [f"bin{i}" for i in range(raw.shape[1])]
    else:
        recipe = list(recipe or DEFAULT_RECIPE)
        raw = np.array([[_stat_value(a, s) for s in recipe] for a in items])
        dims = recipe
    mean = raw.mean(axis=0)
    std = raw.std(axis=0)
    keep = std > 0
    values = (raw[:, keep] - mean[keep]) / std[keep]
    return FeatureMatrix(
        values=values,
        dims=[d for d, k in zip(dims, keep) if k],
        dropped=[d for d, k in zip(dims, keep) if not k],
    )


# ---------------------------------------------------------------------------
# Embeddings


def _pairwise_sq(features: np.ndarray) -> np.ndarray:
    g = features @ features.T
    sq = np.diag(g)
    d2 = sq[:, None] + sq[None, :] - 2 * g
    np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def _is_distance_matrix(data: np.ndarray) -> bool:
    return (
        data.ndim == 2
        and data.shape[0] == data.shape[1]
        and np.allclose(np.diag(data), 0.0)
        and np.allclose(data, data.T, equal_nan=True)
    )


def _grid_fallback(n: int, step: float) -> np.ndarray:
    side = math.ceil(math.sqrt(n))
    coords = np.array(
        [(i % side, i // side) for i in range(n)], dtype=np.float64
    )
    return coords * max(step, 1.0)


def embed(
    data,
    method: str = "mds",
    perplexity: float = 20.0,
    seed: int = 0,
    ids: list[int] | None = None,
    n_iter: int = 500,
    input_kind: str = "auto",
) -> Embedding2D:
    """2D embedding of feature vectors or a precomputed distance matrix.

    mds: classical scaling via the top-2 eigenpairs (deterministic).
    tsne: exact (no tree approximation), seeded init derived per item id,
    fixed iteration count.
    """
    if method not in ("mds", "tsne"):
        raise ValueError(f"unknown embedding method '{method}'")
    if isinstance(data, FeatureMatrix):
        data = data.values
    data = np.asarray(data, dtype=np.float64)
    n = data.shape[0]
    if n < 2:
        raise ValueError("need at least 2 items to embed")
    if input_kind == "auto":
        input_kind = "distance" if _is_distance_matrix(data) else "features"
    if input_kind == "distance":
        finite = data[np.isfinite(data)]
        cap = 2.0 * float(finite.max()) if finite.size and finite.max() > 0 else 1.0
        d2 = np.square(np.where(np.isfinite(data), data, cap))
    else:
        d2 = _pairwise_sq(data)

    ids = list(ids) if ids is not None else list(range(n))

    off_diag = d2[~np.eye(n, dtype=bool)]
    all_equal = off_diag.size and (
        off_diag.max() - off_diag.min() <= 1e-15 * max(off_diag.max(), 1.0)
    )
    # a single pair is trivially "all equal" but embeds exactly; only a
    # genuinely information-free matrix falls back to the grid layout
    if all_equal and (n > 2 or off_diag.max() == 0.0):
        warnings.warn("degenerate (all-equal) distances; using grid fallback layout")
        coords = _grid_fallback(n, math.sqrt(float(off_diag.max())) if off_diag.max() > 0 else 1.0)
        return Embedding2D(coords=coords, method=f"{method}-grid", seed=seed, ids=ids)

    if method == "mds":
        coords = _classical_mds(d2)
    elif method == "tsne":
        coords = _tsne_exact(d2, perplexity, seed, ids, n_iter)
    else:
        raise ValueError(f"unknown embedding method '{method}'")
    if not np.all(np.isfinite(coords)):
        raise RuntimeError("embedding produced non-finite coordinates")
    return Embedding2D(coords=coords, method=method, seed=seed, ids=ids)


def _classical_mds(d2: np.ndarray) -> np.ndarray:
    n = d2.shape[0]
    j = np.eye(n) - np.full((n, n), 1.0 / n)
    b = -0.5 * j @ d2 @ j
    b = 0.5 * (b + b.T)
    vals, vecs = np.linalg.eigh(b)
    order = np.argsort(vals)[::-1][:2]
    coords = np.zeros((n, 2))
    for k, i in enumerate(order):
        lam = max(vals[i], 0.0)
        v = vecs[:, i]
        # sign convention: largest-magnitude entry positive, so permuting
        # items permutes the embedding instead of flipping it
        pivot = np.argmax(np.abs(v))
        if v[pivot] < 0:
            v = -v
        coords[:, k] = v * math.sqrt(lam)
    return coords


def _tsne_exact(
    d2: np.ndarray, perplexity: float, seed: int, ids: list[int], n_iter: int
) -> np.ndarray:
    n = d2.shape[0]
    perplexity = min(perplexity, n - 1.0)
    p = _joint_probabilities(d2, perplexity)

    y = np.empty((n, 2))
    for i, item_id in enumerate(ids):
        rng = np.random.default_rng(np.random.SeedSequence([seed & 0x7FFFFFFF, int(item_id) & 0x7FFFFFFF]))
        y[i] = rng.standard_normal(2) * 1e-4

    momentum = 0.5
    update = np.zeros_like(y)
    exaggeration = 4.0
    # size-scaled learning rate; a fixed large rate scatters small layouts
    lr = max(n / (4.0 * exaggeration), 50.0)
    for it in range(n_iter):
        if it == 100:
            exaggeration = 1.0
        if it == 250:
            momentum = 0.8
        grad = _kl_gradient(p * exaggeration, y)
        update = momentum * update - lr * grad
        y = y + update
        y = y - y.mean(axis=0)
    return y


def _joint_probabilities(d2: np.ndarray, perplexity: float) -> np.ndarray:
    n = d2.shape[0]
    target = math.log(perplexity)
    p = np.zeros((n, n))
    for i in range(n):
        di = np.delete(d2[i], i)
        beta_lo, beta_hi = 0.0, math.inf
        beta = 1.0
        for _ in range(64):
            expd = np.exp(-di * beta)
            s = expd.sum()
            if s <= 0:
                h = 0.0
                probs = np.zeros_like(di)
            else:
                probs = expd / s
                nz = probs > 0
                h = -np.sum(probs[nz] * np.log(probs[nz]))
            if abs(h - target) < 1e-7:
                break
            if h > target:
                beta_lo = beta
                beta = beta * 2 if beta_hi == math.inf else 0.5 * (beta + beta_hi)
            else:
                beta_hi = beta
                beta = 0.5 * (beta + beta_lo)
        row = np.insert(probs, i, 0.0)
        p[i] = row
    p = (p + p.T) / (2.0 * n)
    return np.maximum(p, 1e-12)


def _kl_gradient(p: np.ndarray, y: np.ndarray) -> np.ndarray:
    d2 = _pairwise_sq(y)
    inv = 1.0 / (1.0 + d2)
    np.fill_diagonal(inv, 0.0)
    q = inv / inv.sum()
    q = np.maximum(q, 1e-12)
    pq = (p - q) * inv
    grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)
    return grad
