"""Mergeable bivariate statistics, PDF models, and plot payloads.

Aggregation keeps raw power sums S_pq = sum(x^p y^q) for p+q <= 4, which merge
exactly across any tree of partial aggregates; central co-moments are
recovered by binomial expansion. All moments are population (biased)
throughout. PDF models (histogram, Gaussian mixture, KDE) report their
moments analytically so they can be compared against the raw sample.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

ORDERS = [(p, q) for p in range(5) for q in range(5) if p + q <= 4]


@dataclass
class MomentAggregate:
    """Raw power sums over one (x, y) variable pair, exactly mergeable."""

    x_name: str = "x"
    y_name: str = "y"
    n: int = 0
    sums: np.ndarray = field(default_factory=lambda: np.zeros((5, 5)))
    min_x: float = math.inf
    max_x: float = -math.inf
    min_y: float = math.inf
    max_y: float = -math.inf

    def variable_pair(self) -> tuple[str, str]:
        return (self.x_name, self.y_name)

    def to_dict(self) -> dict:
        return {
            "x": self.x_name,
            "y": self.y_name,
            "n": int(self.n),
            "sums": {f"{p},{q}": float(self.sums[p, q]) for p, q in ORDERS},
            "min": [self.min_x, self.min_y],
            "max": [self.max_x, self.max_y],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MomentAggregate":
        agg = cls(x_name=d["x"], y_name=d["y"], n=int(d["n"]))
        for key, val in d["sums"].items():
            p, q = (int(t) for t in key.split(","))
            agg.sums[p, q] = val
        agg.min_x, agg.min_y = d["min"]
        agg.max_x, agg.max_y = d["max"]
        return agg


def accumulate(samples, x_name: str = "x", y_name: str = "y") -> MomentAggregate:
    """Exact power sums over (x, y) pairs; order-4 terms use compensated
    summation (math.fsum)."""
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    if samples.size and not np.all(np.isfinite(samples)):
        raise ValueError("samples must be finite")
    agg = MomentAggregate(x_name=x_name, y_name=y_name, n=samples.shape[0])
    if samples.shape[0] == 0:
        return agg
    x = samples[:, 0]
    y = samples[:, 1]
    xp = [np.ones_like(x), x, x * x, x**3, x**4]
    yq = [np.ones_like(y), y, y * y, y**3, y**4]
    for p, q in ORDERS:
        agg.sums[p, q] = math.fsum(xp[p] * yq[q])
    agg.min_x = float(x.min())
    agg.max_x = float(x.max())
    agg.min_y = float(y.min())
    agg.max_y = float(y.max())
    return agg


def merge(a: MomentAggregate, b: MomentAggregate) -> MomentAggregate:
    """Combine two aggregates over the same variable pair; equivalent to
    accumulating the concatenated samples."""
    if a.variable_pair() != b.variable_pair():
        raise ValueError(
            f"variable pair mismatch: {a.variable_pair()} vs {b.variable_pair()}"
        )
    out = MomentAggregate(x_name=a.x_name, y_name=a.y_name, n=a.n + b.n)
    out.sums = a.sums + b.sums
    out.min_x = min(a.min_x, b.min_x)
    out.max_x = max(a.max_x, b.max_x)
    out.min_y = min(a.min_y, b.min_y)
    out.max_y = max(a.max_y, b.max_y)
    return out


def comoment(agg: MomentAggregate, p: int, q: int) -> float:
    """Central co-moment E[(x - mx)^p (y - my)^q] from the raw sums."""
    if agg.n < 1:
        raise ValueError("empty aggregate has no moments")
    if p + q > 4 or p < 0 or q < 0:
        raise ValueError(f"order ({p},{q}) out of range (p+q <= 4)")
    n = agg.n
    mx = agg.sums[1, 0] / n
    my = agg.sums[0, 1] / n
    total = 0.0
    for i in range(p + 1):
        for j in range(q + 1):
            total += (
                math.comb(p, i)
                * math.comb(q, j)
                * (-mx) ** (p - i)
                * (-my) ** (q - j)
                * agg.sums[i, j]
            )
    return total / n


def mean_xy(agg: MomentAggregate) -> tuple[float, float]:
    if agg.n < 1:
        raise ValueError("empty aggregate has no mean")
    return (agg.sums[1, 0] / agg.n, agg.sums[0, 1] / agg.n)


# ---------------------------------------------------------------------------
# Histograms


@dataclass
class Histogram1D:
    lo: float
    hi: float
    counts: np.ndarray
    underflow: int = 0
    overflow: int = 0

    @property
    def n(self) -> int:
        return int(self.counts.sum()) + self.underflow + self.overflow

    def centers(self) -> np.ndarray:
        edges = np.linspace(self.lo, self.hi, self.counts.size + 1)
        return 0.5 * (edges[:-1] + edges[1:])

    def merge(self, other: "Histogram1D") -> "Histogram1D":
        if (self.lo, self.hi, self.counts.size) != (other.lo, other.hi, other.counts.size):
            raise ValueError("histogram axes differ; cannot merge")
        return Histogram1D(
            self.lo, self.hi, self.counts + other.counts,
            self.underflow + other.underflow, self.overflow + other.overflow,
        )


@dataclass
class Histogram2D:
    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    counts: np.ndarray  # shape (nx_bins, ny_bins)
    out_of_range: int = 0

    @property
    def n(self) -> int:
        return int(self.counts.sum()) + self.out_of_range

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        ex = np.linspace(self.x_lo, self.x_hi, self.counts.shape[0] + 1)
        ey = np.linspace(self.y_lo, self.y_hi, self.counts.shape[1] + 1)
        return 0.5 * (ex[:-1] + ex[1:]), 0.5 * (ey[:-1] + ey[1:])

    def merge(self, other: "Histogram2D") -> "Histogram2D":
        same = (
            (self.x_lo, self.x_hi, self.y_lo, self.y_hi) ==
            (other.x_lo, other.x_hi, other.y_lo, other.y_hi)
            and self.counts.shape == other.counts.shape
        )
        if not same:
            raise ValueError("histogram axes differ; cannot merge")
        return Histogram2D(
            self.x_lo, self.x_hi, self.y_lo, self.y_hi,
            self.counts + other.counts, self.out_of_range + other.out_of_range,
        )


def _axis_range(values, lo=None, hi=None):
    lo = float(values.min()) if lo is None else float(lo)
    hi = float(values.max()) if hi is None else float(hi)
    if hi <= lo:
        hi = lo + 1.0
    return lo, hi


def histogram1d(values, bins=64, lo=None, hi=None) -> Histogram1D:
    values = np.asarray(values, dtype=np.float64).ravel()
    lo, hi = _axis_range(values, lo, hi)
    inside = (values >= lo) & (values <= hi)
    counts, _ = np.histogram(values[inside], bins=bins, range=(lo, hi))
    return Histogram1D(
        lo, hi, counts.astype(np.int64),
        underflow=int(np.count_nonzero(values < lo)),
        overflow=int(np.count_nonzero(values > hi)),
    )


def histogram2d(samples, bins=(48, 48), x_range=None, y_range=None) -> Histogram2D:
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    x_lo, x_hi = _axis_range(samples[:, 0], *(x_range or (None, None)))
    y_lo, y_hi = _axis_range(samples[:, 1], *(y_range or (None, None)))
    inside = (
        (samples[:, 0] >= x_lo) & (samples[:, 0] <= x_hi)
        & (samples[:, 1] >= y_lo) & (samples[:, 1] <= y_hi)
    )
    counts, _, _ = np.histogram2d(
        samples[inside, 0], samples[inside, 1],
        bins=bins, range=((x_lo, x_hi), (y_lo, y_hi)),
    )
    return Histogram2D(
        x_lo, x_hi, y_lo, y_hi, counts.astype(np.int64),
        out_of_range=int(np.count_nonzero(~inside)),
    )


# ---------------------------------------------------------------------------
# Gaussian mixture model (2D) with EM


@dataclass
class GmmModel:
    weights: np.ndarray  # (k,)
    means: np.ndarray  # (k, 2)
    covs: np.ndarray  # (k, 2, 2) symmetric positive definite
    log_likelihood_trace: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.weights)

    def log_density(self, points) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64).reshape(-1, 2)
        return logsumexp(
            np.log(self.weights)[None, :] + _gauss_logpdf(points, self.means, self.covs),
            axis=1,
        )

    def density_raster(self, x_grid, y_grid) -> np.ndarray:
        xx, yy = np.meshgrid(x_grid, y_grid, indexing="ij")
        pts = np.stack([xx.ravel(), yy.ravel()], axis=1)
        return np.exp(self.log_density(pts)).reshape(len(x_grid), len(y_grid))

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "covs": self.covs.tolist(),
        }


def _gauss_logpdf(points, means, covs):
    """(n, k) log densities of 2D Gaussians."""
    n = points.shape[0]
    k = means.shape[0]
    out = np.empty((n, k))
    for j in range(k):
        diff = points - means[j]
        cov = covs[j]
        det = cov[0, 0] * cov[1, 1] - cov[0, 1] * cov[1, 0]
        inv = np.array([[cov[1, 1], -cov[0, 1]], [-cov[1, 0], cov[0, 0]]]) / det
        maha = np.einsum("ni,ij,nj->n", diff, inv, diff)
        out[:, j] = -0.5 * (maha + math.log(4 * math.pi**2 * det))
    return out


def _kmeanspp_init(samples, k, rng):
    """Seeded k-means++ center choice."""
    centers = [samples[rng.integers(samples.shape[0])]]
    for _ in range(k - 1):
        d2 = np.min(
            [np.sum((samples - c) ** 2, axis=1) for c in centers], axis=0
        )
        total = d2.sum()
        if total <= 0:
            centers.append(samples[rng.integers(samples.shape[0])])
            continue
        centers.append(samples[rng.choice(samples.shape[0], p=d2 / total)])
    return np.array(centers)


def fit_gmm(
    samples, k: int, seed: int = 0, max_iter: int = 200, tol: float = 1e-6
) -> GmmModel:
    """EM fit of a k-component 2D Gaussian mixture, k-means++ initialized.

    Covariances are regularized (+eps I, eps = 1e-6 of the data variance)
    only when near-singular, so healthy fits report exact sample moments.
    """
    samples = np.asarray(samples, dtype=np.float64).reshape(-1, 2)
    n = samples.shape[0]
    if n < 1:
        raise ValueError("cannot fit a mixture to an empty sample")
    data_var = float(np.mean(np.var(samples, axis=0)))
    eps = 1e-6 * (data_var if data_var > 0 else 1.0)

    distinct = np.unique(samples, axis=0)
    if distinct.shape[0] == 1:
        warnings.warn("all samples identical; returning a single-point model")
        cov = np.eye(2) * eps
        return GmmModel(
            weights=np.ones(1), means=distinct.copy(), covs=cov[None, :, :],
        )
    if distinct.shape[0] < k:
        raise ValueError(f"need at least {k} distinct samples, have {distinct.shape[0]}")

    rng = np.random.default_rng(seed)
    means = _kmeanspp_init(samples, k, rng)
    base_cov = np.cov(samples.T, bias=True)
    base_cov = _regularize(base_cov, eps)
    covs = np.repeat(base_cov[None, :, :], k, axis=0)
    weights = np.full(k, 1.0 / k)

    trace: list[float] = []
    prev_ll = -np.inf
    for _ in range(max_iter):
        # E step
        log_r = np.log(weights)[None, :] + _gauss_logpdf(samples, means, covs)
        norm = logsumexp(log_r, axis=1)
        ll = float(norm.sum())
        trace.append(ll)
        resp = np.exp(log_r - norm[:, None])
        # M step
        nk = resp.sum(axis=0)
        nk = np.maximum(nk, 1e-300)
        weights = nk / n
        means = (resp.T @ samples) / nk[:, None]
        for j in range(k):
            diff = samples - means[j]
            cov = (resp[:, j][:, None] * diff).T @ diff / nk[j]
            covs[j] = _regularize(cov, eps)
        if ll - prev_ll < tol and np.isfinite(prev_ll):
            break
        prev_ll = ll
    return GmmModel(weights=weights, means=means, covs=covs, log_likelihood_trace=trace)


def _regularize(cov, eps):
    cov = 0.5 * (cov + cov.T)
    eig = np.linalg.eigvalsh(cov)
    if eig.min() < eps:
        cov = cov + np.eye(2) * eps
    return cov


# ---------------------------------------------------------------------------
# Kernel density estimation (Gaussian product kernel)


@dataclass
class KdeModel:
    samples: np.ndarray  # (n, d), d in {1, 2}
    bandwidth: np.ndarray  # (d,) per-axis, > 0
    kernel: str = "gaussian"

    def to_dict(self) -> dict:
        return {"bandwidth": self.bandwidth.tolist(), "n": int(self.samples.shape[0])}


def _bandwidth(samples, rule, fixed=None):
    n, d = samples.shape
    sigma = samples.std(axis=0)
    if rule == "fixed":
        if fixed is None:
            raise ValueError("fixed bandwidth rule requires a bandwidth value")
        return np.broadcast_to(np.asarray(fixed, dtype=np.float64), (d,)).copy()
    if rule == "scott":
        h = sigma * n ** (-1.0 / (d + 4))
    elif rule == "silverman":
        h = sigma * (4.0 / (d + 2)) ** (1.0 / (d + 4)) * n ** (-1.0 / (d + 4))
    else:
        raise ValueError(f"unknown bandwidth rule '{rule}'")
    if np.any(h <= 0):
        warnings.warn("zero variance; falling back to a fixed minimal bandwidth")
        span = samples.max(axis=0) - samples.min(axis=0)
        h = np.where(h > 0, h, np.maximum(1e-3 * np.maximum(span, 1.0), 1e-6))
    return h


def kde_model(samples, bandwidth_rule="scott", bandwidth=None) -> KdeModel:
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim == 1:
        samples = samples[:, None]
    if samples.shape[0] < 1:
        raise ValueError("need at least one sample")
    h = _bandwidth(samples, bandwidth_rule, bandwidth)
    return KdeModel(samples=samples, bandwidth=h)


def kde_density(
    samples, bandwidth_rule="scott", eval_grid=None, grid_size=64, bandwidth=None
) -> dict:
    """Density raster of the Gaussian product-kernel estimate.

    The default grid covers the data range extended by 4 bandwidths per axis,
    over which the raster integrates to ~1. Returns axes, raster, bandwidths.
    """
    model = kde_model(samples, bandwidth_rule, bandwidth)
    pts, h = model.samples, model.bandwidth
    d = pts.shape[1]
    if eval_grid is None:
        axes = [
            np.linspace(
                pts[:, i].min() - 4 * h[i], pts[:, i].max() + 4 * h[i], grid_size
            )
            for i in range(d)
        ]
    else:
        axes = [np.asarray(g, dtype=np.float64) for g in eval_grid]
    if d == 1:
        z = (axes[0][None, :] - pts[:, 0][:, None]) / h[0]
        density = np.exp(-0.5 * z**2).sum(axis=0) / (
            pts.shape[0] * h[0] * math.sqrt(2 * math.pi)
        )
    else:
        zx = (axes[0][None, :] - pts[:, 0][:, None]) / h[0]
        zy = (axes[1][None, :] - pts[:, 1][:, None]) / h[1]
        kx = np.exp(-0.5 * zx**2)
        ky = np.exp(-0.5 * zy**2)
        density = (kx.T @ ky) / (pts.shape[0] * h[0] * h[1] * 2 * math.pi)
    return {
        "axes": [a.tolist() for a in axes],
        "density": density.tolist(),
        "bandwidth": h.tolist(),
        "n": int(pts.shape[0]),
    }


# ---------------------------------------------------------------------------
# Plot payloads

PLOT_MODES = ("hist1d", "hist2d", "cdf", "conditional1d", "conditional2d", "scatter")


def plot_data(samples, mode: str, bins=48, x_range=None, y_range=None) -> dict:
    """Payload for one plot layer. Samples are (n, 2), or (n, 3) for
    conditional2d where the third column is the conditioned variable.
    Empty bins are reported as missing (null), not zero."""
    if mode not in PLOT_MODES:
        raise ValueError(f"unknown plot mode '{mode}'")
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 2 or samples.shape[0] < 1:
        raise ValueError("need at least one sample row")
    need = 3 if mode == "conditional2d" else 2
    if samples.shape[1] < need:
        raise ValueError(f"mode '{mode}' needs {need} columns")

    x = samples[:, 0]
    y = samples[:, 1]
    x_lo, x_hi = _axis_range(x, *(x_range or (None, None)))
    y_lo, y_hi = _axis_range(y, *(y_range or (None, None)))
    payload = {
        "mode": mode,
        "x_range": [x_lo, x_hi],
        "y_range": [y_lo, y_hi],
        "n": int(samples.shape[0]),
    }

    if mode == "scatter":
        payload["points"] = samples[:, :2].tolist()
    elif mode == "hist1d":
        h = histogram1d(x, bins=bins, lo=x_lo, hi=x_hi)
        payload.update(
            counts=h.counts.tolist(), underflow=h.underflow, overflow=h.overflow
        )
    elif mode == "hist2d":
        h = histogram2d(samples[:, :2], bins=(bins, bins),
                        x_range=(x_lo, x_hi), y_range=(y_lo, y_hi))
        payload.update(counts=h.counts.tolist(), out_of_range=h.out_of_range)
    elif mode == "cdf":
        h = histogram2d(samples[:, :2], bins=(bins, bins),
                        x_range=(x_lo, x_hi), y_range=(y_lo, y_hi))
        total = h.counts.sum()
        cum = h.counts.cumsum(axis=0).cumsum(axis=1) / max(total, 1)
        payload.update(cdf=cum.tolist())
    elif mode == "conditional1d":
        idx = np.clip(
            ((x - x_lo) / (x_hi - x_lo) * bins).astype(int), 0, bins - 1
        )
        means: list[float | None] = []
        stds: list[float | None] = []
        for b in range(bins):
            sel = y[idx == b]
            if sel.size == 0:
                means.append(None)
                stds.append(None)
            else:
                means.append(float(sel.mean()))
                stds.append(float(sel.std()))
        payload.update(means=means, stds=stds, bins=bins)
    else:  # conditional2d
        z = samples[:, 2]
        ix = np.clip(((x - x_lo) / (x_hi - x_lo) * bins).astype(int), 0, bins - 1)
        iy = np.clip(((y - y_lo) / (y_hi - y_lo) * bins).astype(int), 0, bins - 1)
        sums = np.zeros((bins, bins))
        cnts = np.zeros((bins, bins), dtype=np.int64)
        np.add.at(sums, (ix, iy), z)
        np.add.at(cnts, (ix, iy), 1)
        grid = [
            [
                (float(sums[i, j] / cnts[i, j]) if cnts[i, j] else None)
                for j in range(bins)
            ]
            for i in range(bins)
        ]
        payload.update(z_mean=grid, bins=bins)
    return payload


# ---------------------------------------------------------------------------
# Model moments and the comparison table

_GAUSS_CENTRAL = {
    (0, 0): lambda sxx, sxy, syy: 1.0,
    (2, 0): lambda sxx, sxy, syy: sxx,
    (1, 1): lambda sxx, sxy, syy: sxy,
    (0, 2): lambda sxx, sxy, syy: syy,
    (4, 0): lambda sxx, sxy, syy: 3 * sxx**2,
    (3, 1): lambda sxx, sxy, syy: 3 * sxx * sxy,
    (2, 2): lambda sxx, sxy, syy: sxx * syy + 2 * sxy**2,
    (1, 3): lambda sxx, sxy, syy: 3 * syy * sxy,
    (0, 4): lambda sxx, sxy, syy: 3 * syy**2,
}


def _gauss_central(i, j, cov):
    if (i + j) % 2 == 1:
        return 0.0
    return _GAUSS_CENTRAL[(i, j)](cov[0, 0], cov[0, 1], cov[1, 1])


def mixture_central_moment(weights, means, covs, p, q) -> float:
    """Central co-moment of a 2D Gaussian mixture about the mixture mean."""
    mu = np.average(means, axis=0, weights=weights)
    total = 0.0
    for w, m, c in zip(weights, means, covs):
        dx, dy = m[0] - mu[0], m[1] - mu[1]
        for i in range(p + 1):
            for j in range(q + 1):
                g = _gauss_central(i, j, c)
                if g == 0.0:
                    continue
                total += (
                    w
                    * math.comb(p, i)
                    * math.comb(q, j)
                    * dx ** (p - i)
                    * dy ** (q - j)
                    * g
                )
    return float(total)


def _model_moments(model) -> dict[tuple[int, int], float]:
    """Analytic moments of a fitted model, keyed like the raw table: (1,0)
    and (0,1) are means, higher orders are central."""
    if isinstance(model, GmmModel):
        w, m, c = model.weights, model.means, model.covs
        mu = np.average(m, axis=0, weights=w)
        out = {(1, 0): float(mu[0]), (0, 1): float(mu[1])}
        for p, q in ORDERS:
            if p + q >= 2:
                out[(p, q)] = mixture_central_moment(w, m, c, p, q)
        return out
    if isinstance(model, KdeModel):
        pts, h = model.samples, model.bandwidth
        if pts.shape[1] != 2:
            raise ValueError("moment table requires a bivariate KDE")
        n = pts.shape[0]
        w = np.full(n, 1.0 / n)
        covs = np.repeat(np.diag(h**2)[None, :, :], n, axis=0)
        mu = pts.mean(axis=0)
        out = {(1, 0): float(mu[0]), (0, 1): float(mu[1])}
        for p, q in ORDERS:
            if p + q >= 2:
                out[(p, q)] = mixture_central_moment(w, pts, covs, p, q)
        return out
    if isinstance(model, Histogram2D):
        cx, cy = model.centers()
        mass = model.counts.astype(np.float64)
        total = mass.sum()
        if total <= 0:
            raise ValueError("empty histogram has no moments")
        mass = mass / total
        mx = float((mass.sum(axis=1) * cx).sum())
        my = float((mass.sum(axis=0) * cy).sum())
        out = {(1, 0): mx, (0, 1): my}
        dx = cx - mx
        dy = cy - my
        for p, q in ORDERS:
            if p + q >= 2:
                out[(p, q)] = float((mass * np.outer(dx**p, dy**q)).sum())
        return out
    raise TypeError(f"unsupported model type {type(model).__name__}")


def _raw_moments(agg: MomentAggregate) -> dict[tuple[int, int], float]:
    mx, my = mean_xy(agg)
    out = {(1, 0): mx, (0, 1): my}
    for p, q in ORDERS:
        if p + q >= 2:
            out[(p, q)] = comoment(agg, p, q)
    return out


def moments_report(model, raw: MomentAggregate) -> list[dict]:
    """Rows of (moment, raw value, model value, relative error), order 1..4.

    Order-1 rows are the means; higher orders are central co-moments. The
    relative error is against the raw value (0 when both sides agree
    exactly, infinite when the raw moment is 0 but the model's is not).
    """
    model_m = _model_moments(model)
    raw_m = _raw_moments(agg=raw)
    rows = []
    for p, q in sorted(model_m, key=lambda t: (t[0] + t[1], -t[0])):
        rv = raw_m[(p, q)]
        mv = model_m[(p, q)]
        if mv == rv:
            err = 0.0
        elif rv == 0.0:
            err = math.inf
        else:
            err = abs(mv - rv) / abs(rv)
        rows.append(
            {
                "moment": f"mu_{p}{q}",
                "order": p + q,
                "raw": rv,
                "model": mv,
                "relative_error": err,
            }
        )
    return rows


def moments_latex(rows: list[dict], x_name: str = "x", y_name: str = "y") -> str:
    """The comparison table as LaTeX tabular text."""
    lines = [
        r"\begin{tabular}{lrrr}",
        r"\hline",
        rf"moment $({x_name},{y_name})$ & raw & model & rel.\ error \\",
        r"\hline",
    ]
    for row in rows:
        err = row["relative_error"]
        err_s = r"$\infty$" if math.isinf(err) else f"{err:.3e}"
        lines.append(
            rf"$\mu_{{{row['moment'][3:]}}}$ & {row['raw']:.6g} & "
            rf"{row['model']:.6g} & {err_s} \\"
        )
    lines += [r"\hline", r"\end{tabular}"]
    return "\n".join(lines)
