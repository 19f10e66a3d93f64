"""Trend estimation: natural cubic smoothing splines plus a residual
moving-block bootstrap with post-blackening.

The spline minimizes sum (y_i - f(x_i))^2 + lam * integral f''(x)^2 dx
over natural cubic splines with knots at the data abscissae. With the
standard tridiagonal Q (second-difference) and R (roughness) matrices,
the interior second derivatives solve (R + lam Q'Q) g = Q'y and the
fitted values are y - lam Q g; R + lam Q'Q is symmetric pentadiagonal,
so the solve is banded and O(n).

Uncertainty: resample residual blocks with replacement, add them back
onto the base trend (post-blackening), refit with the base smoothing
parameter, and read percentile intervals off the replicate trends.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solveh_banded

from .signals import RateSeries


class InsufficientDataError(ValueError):
    """Too few defined points to fit or resample."""


def _spacings(x: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    if np.any(h <= 0):
        raise ValueError("abscissae must be strictly increasing")
    return h


def _qt_matvec(h: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Q'y: second divided differences of y (shape (n-2,) or (n-2, B))."""
    inv = 1.0 / h
    a = inv[:-1]
    b = -(inv[:-1] + inv[1:])
    c = inv[1:]
    if y.ndim == 1:
        return a * y[:-2] + b * y[1:-1] + c * y[2:]
    return a[:, None] * y[:-2] + b[:, None] * y[1:-1] + c[:, None] * y[2:]


def _q_matvec(h: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Q g for interior second derivatives g (shape (n-2,) or (n-2, B))."""
    n = len(h) + 1
    inv = 1.0 / h
    shape = (n,) if g.ndim == 1 else (n, g.shape[1])
    out = np.zeros(shape)
    a = inv[:-1]
    b = -(inv[:-1] + inv[1:])
    c = inv[1:]
    if g.ndim == 1:
        out[:-2] += a * g
        out[1:-1] += b * g
        out[2:] += c * g
    else:
        out[:-2] += a[:, None] * g
        out[1:-1] += b[:, None] * g
        out[2:] += c[:, None] * g
    return out


def _penalty_matrices(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Banded (upper form, bandwidth 2) R and Q'Q of size n-2."""
    m = len(h) - 1  # n - 2
    inv = 1.0 / h
    r_band = np.zeros((3, m))
    r_band[2] = (h[:-1] + h[1:]) / 3.0
    r_band[1, 1:] = h[1:-1] / 6.0

    qtq_band = np.zeros((3, m))
    qtq_band[2] = inv[:-1] ** 2 + (inv[:-1] + inv[1:]) ** 2 + inv[1:] ** 2
    qtq_band[1, 1:] = -(inv[1:-1]) * (inv[:-2] + 2.0 * inv[1:-1] + inv[2:])
    if m >= 3:
        qtq_band[0, 2:] = inv[1:-2] * inv[2:-1]
    return r_band, qtq_band


def _band_to_dense(band: np.ndarray) -> np.ndarray:
    m = band.shape[1]
    dense = np.zeros((m, m))
    for offset in range(3):
        diag = band[2 - offset, offset:]
        dense += np.diag(diag, k=offset)
        if offset:
            dense += np.diag(diag, k=-offset)
    return dense


@dataclass
class SplineFit:
    """A fitted natural cubic smoothing spline, evaluable anywhere in range."""

    x: np.ndarray
    y: np.ndarray
    lam: float
    fitted: np.ndarray
    gamma: np.ndarray  # second derivatives at interior knots

    @property
    def residuals(self) -> np.ndarray:
        return self.y - self.fitted

    def evaluate(self, xq, extrapolate: bool = False) -> np.ndarray:
        return _eval_natural_cubic(
            self.x, self.fitted, self.gamma, np.asarray(xq, dtype=float),
            extrapolate=extrapolate,
        )

    __call__ = evaluate


def _eval_natural_cubic(
    x: np.ndarray,
    f: np.ndarray,
    gamma: np.ndarray,
    xq: np.ndarray,
    extrapolate: bool = False,
) -> np.ndarray:
    """Evaluate a natural cubic spline given knot values and interior
    second derivatives. f/gamma may be (n,)/(n-2,) or (n, B)/(n-2, B);
    the result is (m,) or (m, B). Outside the knot range the natural
    spline continues linearly; that is an error unless `extrapolate`."""
    outside_lo = xq < x[0]
    outside_hi = xq > x[-1]
    if np.any(outside_lo) or np.any(outside_hi):
        if not extrapolate:
            raise ValueError("evaluation point outside fitted range")
        inner = _eval_natural_cubic(
            x, f, gamma, np.clip(xq, x[0], x[-1]), extrapolate=False
        )
        g1 = gamma[0] if len(gamma) else 0.0
        g2 = gamma[-1] if len(gamma) else 0.0
        slope_lo = (f[1] - f[0]) / (x[1] - x[0]) - (x[1] - x[0]) * g1 / 6.0
        slope_hi = (f[-1] - f[-2]) / (x[-1] - x[-2]) + (x[-1] - x[-2]) * g2 / 6.0
        d_lo = np.where(outside_lo, xq - x[0], 0.0)
        d_hi = np.where(outside_hi, xq - x[-1], 0.0)
        if f.ndim == 1:
            return inner + d_lo * slope_lo + d_hi * slope_hi
        return inner + d_lo[:, None] * slope_lo + d_hi[:, None] * slope_hi
    g_full_shape = (len(x),) if f.ndim == 1 else (len(x), f.shape[1])
    g = np.zeros(g_full_shape)
    g[1:-1] = gamma
    idx = np.clip(np.searchsorted(x, xq, side="right") - 1, 0, len(x) - 2)
    h = x[idx + 1] - x[idx]
    a = (x[idx + 1] - xq) / h
    b = (xq - x[idx]) / h
    if f.ndim == 1:
        return (
            a * f[idx]
            + b * f[idx + 1]
            + ((a**3 - a) * g[idx] + (b**3 - b) * g[idx + 1]) * h**2 / 6.0
        )
    a = a[:, None]
    b = b[:, None]
    h2 = (h**2)[:, None]
    return (
        a * f[idx]
        + b * f[idx + 1]
        + ((a**3 - a) * g[idx] + (b**3 - b) * g[idx + 1]) * h2 / 6.0
    )


def fit_points(x, y, lam: float) -> SplineFit:
    """Fit the penalized least-squares natural cubic spline at fixed lam."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.ndim != 1 or x.shape != y.shape:
        raise ValueError("x and y must be 1-D and equal length")
    if len(x) < 4:
        raise InsufficientDataError(f"need >= 4 points, got {len(x)}")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("non-finite input")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    h = _spacings(x)
    r_band, qtq_band = _penalty_matrices(h)
    m_band = r_band + lam * qtq_band
    gamma = solveh_banded(m_band, _qt_matvec(h, y))
    fitted = y - lam * _q_matvec(h, gamma)
    return SplineFit(x=x, y=y, lam=float(lam), fitted=fitted, gamma=gamma)


def gcv_score(x, y, lam: float) -> float:
    """Generalized cross-validation score at one smoothing parameter."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    h = _spacings(x)
    r_band, qtq_band = _penalty_matrices(h)
    m_dense = _band_to_dense(r_band + lam * qtq_band)
    qtq_dense = _band_to_dense(qtq_band)
    factor = cho_factor(m_dense, lower=False)
    trace_term = np.trace(cho_solve(factor, qtq_dense))
    df = n - lam * trace_term
    gamma = cho_solve(factor, _qt_matvec(h, y))
    resid = lam * _q_matvec(h, gamma)
    rss = float(resid @ resid)
    denom = 1.0 - df / n
    if denom <= 0:
        return math.inf
    return (rss / n) / denom**2


def default_lambda_grid(x, n_grid: int = 61) -> np.ndarray:
    """Logarithmic lam grid spanning 1e-6*s to 1e6*s, s set by spacing."""
    h = _spacings(np.asarray(x, dtype=float))
    scale = len(x) * float(np.mean(h)) ** 3
    return np.geomspace(1e-6 * scale, 1e6 * scale, n_grid)


def select_lambda_gcv(x, y, grid=None) -> float:
    """Pick lam minimizing GCV over a log grid; deterministic, first
    minimizer wins on ties."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(x) < 5:
        raise InsufficientDataError(f"need >= 5 points for GCV, got {len(x)}")
    if grid is None:
        grid = default_lambda_grid(x)
    scores = np.array([gcv_score(x, y, lam) for lam in grid])
    return float(grid[int(np.argmin(scores))])


def select_lambda_block_cv(
    x,
    y,
    block_length: int = 7,
    gap: int = 6,
    grid=None,
) -> float:
    """Pick lam by leave-block-out cross-validation with a buffer gap.

    Rates built from 7-day trailing averages carry noise correlated over
    the window span, which makes leave-one-out criteria (GCV included)
    undersmooth badly: every held-out point has near-duplicates in the
    training set. Holding out `block_length`-day blocks and additionally
    dropping a `gap`-day buffer on each side from the training set breaks
    that leakage. Deterministic; first minimizer wins on ties.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 4 + block_length + 2 * gap:
        raise InsufficientDataError(
            f"need >= {4 + block_length + 2 * gap} points for block CV, got {n}"
        )
    if grid is None:
        grid = default_lambda_grid(x)

    blocks = []
    for s in range(0, n, block_length):
        held = np.arange(s, min(s + block_length, n))
        train = np.ones(n, dtype=bool)
        train[max(0, s - gap) : min(n, s + block_length + gap)] = False
        if train.sum() >= 4:
            blocks.append((held, train))
    if not blocks:
        raise InsufficientDataError("no usable cross-validation blocks")

    scores = np.empty(len(grid))
    for i, lam in enumerate(grid):
        err = 0.0
        count = 0
        for held, train in blocks:
            fit = fit_points(x[train], y[train], lam)
            pred = fit.evaluate(x[held], extrapolate=True)
            err += float(np.sum((y[held] - pred) ** 2))
            count += len(held)
        scores[i] = err / count
    return float(grid[int(np.argmin(scores))])


def _series_points(series: RateSeries) -> tuple[np.ndarray, np.ndarray]:
    """Defined (day index, value) points of a rate series."""
    mask = ~series.series.gaps
    x = np.flatnonzero(mask).astype(float)
    y = series.series.values[mask]
    return x, y


def fit_smoothing_spline(series: RateSeries, lam="block-cv") -> SplineFit:
    """Fit the trend spline to a rate series on its defined days only.

    `lam` may be a number, "gcv", or "block-cv" (default: block CV, which
    is robust to the window-induced residual correlation of these series).
    """
    x, y = _series_points(series)
    if isinstance(lam, str):
        if lam == "gcv":
            lam = select_lambda_gcv(x, y)
        elif lam == "block-cv":
            lam = select_lambda_block_cv(x, y)
        else:
            raise ValueError(f"unknown lam spec: {lam}")
    return fit_points(x, y, float(lam))


@dataclass(frozen=True)
class BootstrapConfig:
    replicates: int = 1000
    block_length: int = 7
    seed: int = 0
    level: float = 0.95
    reselect_lambda: bool = False

    def __post_init__(self):
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.block_length < 1:
            raise ValueError("block_length must be >= 1")
        if not (0 < self.level < 1):
            raise ValueError("level must be in (0, 1)")


def moving_block_resample(
    residuals: np.ndarray, block_length: int, rng: np.random.Generator
) -> np.ndarray:
    """One moving-block resample of a residual series.

    Draws ceil(n/L) of the n-L+1 overlapping length-L windows uniformly
    with replacement, concatenates, truncates to length n.
    """
    residuals = np.asarray(residuals, dtype=float)
    n = len(residuals)
    if n < block_length:
        raise InsufficientDataError(
            f"series length {n} shorter than block length {block_length}"
        )
    n_blocks = -(-n // block_length)
    starts = rng.integers(0, n - block_length + 1, size=n_blocks)
    out = np.concatenate(
        [residuals[s : s + block_length] for s in starts]
    )
    return out[:n]


def post_blacken(base: SplineFit, resampled_residuals: np.ndarray) -> np.ndarray:
    """Synthetic ordinates: base fitted values plus resampled residuals."""
    resampled_residuals = np.asarray(resampled_residuals, dtype=float)
    if resampled_residuals.shape != base.fitted.shape:
        raise ValueError("residual length does not match the fit")
    return base.fitted + resampled_residuals


@dataclass
class ReplicateSet:
    """B refitted trends from one resampling pass over the base fit."""

    base: SplineFit
    lams: np.ndarray  # per-replicate smoothing parameter
    fitted: np.ndarray  # (n, B)
    gammas: np.ndarray  # (n-2, B)

    @property
    def n_replicates(self) -> int:
        return self.fitted.shape[1]

    def evaluate(self, xq) -> np.ndarray:
        """Replicate trend values at query points, shape (m, B)."""
        return _eval_natural_cubic(
            self.base.x, self.fitted, self.gammas, np.asarray(xq, dtype=float)
        )


def build_replicates(base: SplineFit, config: BootstrapConfig) -> ReplicateSet:
    """Resample residual blocks, post-blacken, refit each replicate.

    Per-replicate RNG streams are spawned deterministically from the
    master seed, so parallel and sequential execution agree; here all
    replicates share one banded factorization (same lam, same knots) and
    are solved as a single multi-RHS system.
    """
    b = config.replicates
    children = np.random.SeedSequence(config.seed).spawn(b)
    residuals = base.residuals
    synthetic = np.empty((len(base.x), b))
    for j, child in enumerate(children):
        rng = np.random.default_rng(child)
        synthetic[:, j] = post_blacken(
            base, moving_block_resample(residuals, config.block_length, rng)
        )

    if config.reselect_lambda:
        lams = np.empty(b)
        fitted = np.empty_like(synthetic)
        gammas = np.empty((len(base.x) - 2, b))
        for j in range(b):
            lam_j = select_lambda_block_cv(base.x, synthetic[:, j])
            fit_j = fit_points(base.x, synthetic[:, j], lam_j)
            lams[j] = lam_j
            fitted[:, j] = fit_j.fitted
            gammas[:, j] = fit_j.gamma
        return ReplicateSet(base=base, lams=lams, fitted=fitted, gammas=gammas)

    h = _spacings(base.x)
    r_band, qtq_band = _penalty_matrices(h)
    m_band = r_band + base.lam * qtq_band
    gammas = solveh_banded(m_band, _qt_matvec(h, synthetic))
    fitted = synthetic - base.lam * _q_matvec(h, gammas)
    lams = np.full(b, base.lam)
    return ReplicateSet(base=base, lams=lams, fitted=fitted, gammas=gammas)


@dataclass(frozen=True)
class IntervalEstimate:
    date: dt.date
    median: float
    lower: float
    upper: float

    def __post_init__(self):
        if not (self.lower <= self.median <= self.upper):
            raise ValueError("percentiles out of order")


@dataclass(frozen=True)
class DropEstimate:
    date_old: dt.date
    date_new: dt.date
    median: float
    lower: float
    upper: float
    excluded_replicates: int = 0
    flagged: bool = False

    def __post_init__(self):
        if not (self.lower <= self.median <= self.upper):
            raise ValueError("percentiles out of order")


def _nearest_rank(sorted_values: np.ndarray, q: float) -> float:
    """Nearest-rank percentile: the ceil(q*B)-th order statistic."""
    b = len(sorted_values)
    k = min(max(math.ceil(q * b), 1), b)
    return float(sorted_values[k - 1])


def _percentile_triplet(values: np.ndarray, level: float) -> tuple[float, float, float]:
    s = np.sort(values)
    alpha = (1.0 - level) / 2.0
    return (
        _nearest_rank(s, 0.5),
        _nearest_rank(s, alpha),
        _nearest_rank(s, 1.0 - alpha),
    )


@dataclass
class TrendResult:
    """Levels and drops read off one shared replicate set."""

    base: SplineFit
    replicates: ReplicateSet
    levels: list[IntervalEstimate] = field(default_factory=list)
    drops: list[DropEstimate] = field(default_factory=list)
    clipped_bounds: int = 0


def _clip_unit(value: float, counter: list[int]) -> float:
    if value < 0.0 or value > 1.0:
        counter[0] += 1
        return min(max(value, 0.0), 1.0)
    return value


def analyze_trend(
    series: RateSeries,
    config: BootstrapConfig,
    dates: list[dt.date],
    date_pairs: list[tuple[dt.date, dt.date]] = (),
    lam="block-cv",
    clip_to_unit: bool = True,
) -> TrendResult:
    """Fit, bootstrap once, and extract levels and relative drops.

    Levels and drops come from the same replicate trends, so drop
    intervals reflect within-replicate dependence between the two dates.
    Rates live on [0, 1]; reported values are clipped there with a count.
    """
    base = fit_smoothing_spline(series, lam=lam)
    reps = build_replicates(base, config)
    result = TrendResult(base=base, replicates=reps)
    clip_counter = [0]

    def maybe_clip(v: float) -> float:
        return _clip_unit(v, clip_counter) if clip_to_unit else v

    all_dates = list(dates) + [d for pair in date_pairs for d in pair]
    xq = np.array([series.series.day_index(d) for d in all_dates], dtype=float)
    values = reps.evaluate(xq) if len(xq) else np.empty((0, reps.n_replicates))

    for i, date in enumerate(dates):
        med, lo, hi = _percentile_triplet(values[i], config.level)
        result.levels.append(
            IntervalEstimate(
                date=date,
                median=maybe_clip(med),
                lower=maybe_clip(lo),
                upper=maybe_clip(hi),
            )
        )

    offset = len(dates)
    for j, (d_old, d_new) in enumerate(date_pairs):
        old = values[offset + 2 * j]
        new = values[offset + 2 * j + 1]
        ok = old != 0.0
        excluded = int(np.sum(~ok))
        if excluded == len(old):
            raise InsufficientDataError("all replicates have zero old-date value")
        rel = (new[ok] - old[ok]) / old[ok]
        med, lo, hi = _percentile_triplet(rel, config.level)
        result.drops.append(
            DropEstimate(
                date_old=d_old,
                date_new=d_new,
                median=med,
                lower=lo,
                upper=hi,
                excluded_replicates=excluded,
                flagged=excluded > 0.01 * reps.n_replicates,
            )
        )
    result.clipped_bounds = clip_counter[0]
    return result


def estimate_with_ci(
    series: RateSeries, config: BootstrapConfig, dates: list[dt.date], lam="block-cv"
) -> list[IntervalEstimate]:
    """Per-date median and percentile bounds across bootstrap replicates."""
    return analyze_trend(series, config, dates, lam=lam).levels


def estimate_drop(
    series: RateSeries,
    config: BootstrapConfig,
    date_old: dt.date,
    date_new: dt.date,
    lam="block-cv",
) -> DropEstimate:
    """Relative change (new - old)/old with percentile bounds, computed
    per replicate."""
    return analyze_trend(
        series, config, [], [(date_old, date_new)], lam=lam
    ).drops[0]
