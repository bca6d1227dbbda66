"""Univariate Parzen-window estimators used to build the good/bad densities.

Numeric parameters get a Gaussian-kernel KDE (fitted in log10 space for
``log_continuous`` domains, in the reals for ``integer`` ones). Categorical
parameters get an additively smoothed frequency table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence, Union

import numpy as np

from .search_space import CATEGORICAL, INTEGER, LOG_CONTINUOUS, ParamDomain

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
BANDWIDTH_FLOOR = 1e-3

IDENTITY = "identity"
LOG10 = "log10"


def gaussian_kernel(u):
    """Standard normal kernel ``exp(-u^2 / 2) / sqrt(2 pi)``; accepts arrays."""
    return np.exp(-0.5 * np.square(u) - _LOG_SQRT_2PI)


def _forward(values, transform: str) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    return np.log10(values) if transform == LOG10 else values


def _inverse(values: np.ndarray, transform: str) -> np.ndarray:
    return np.power(10.0, values) if transform == LOG10 else values


def select_bandwidth(samples: Sequence[float], domain_width: float) -> float:
    """Scott's rule ``std * n**(-1/5)`` floored at ``1e-3 * domain_width``.

    The standard deviation uses ``ddof=1``; a single sample counts as zero
    spread, so the floor applies.
    """
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise ValueError("bandwidth needs at least one sample")
    if domain_width <= 0:
        raise ValueError("domain_width must be positive")
    sigma = float(np.std(x, ddof=1)) if x.size > 1 else 0.0
    return max(sigma * x.size ** -0.2, BANDWIDTH_FLOOR * domain_width)


def _fold(x: np.ndarray, lo, hi) -> np.ndarray:
    """Reflect ``x`` into ``[lo, hi]`` (repeated mirroring); bounds broadcast."""
    width = np.asarray(hi - lo, dtype=float)
    safe = np.where(width > 0, width, 1.0)
    y = np.mod(x - lo, 2.0 * safe)
    y = np.where(y > safe, 2.0 * safe - y, y)
    return np.where(width > 0, lo + y, lo + 0.0 * y)


@dataclass(frozen=True)
class NumericKde:
    """Gaussian KDE over (possibly transformed) numeric samples.

    ``samples`` are stored in the original parameter scale; ``points`` holds
    them after ``transform``. ``bounds`` are in the original scale and are
    only used when sampling.
    """

    samples: tuple[float, ...]
    bandwidth: float
    transform: str = IDENTITY
    bounds: tuple[float, float] | None = None
    integer: bool = False
    points: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "samples", tuple(float(s) for s in self.samples))
        if not self.samples:
            raise ValueError("NumericKde needs at least one sample")
        if not (self.bandwidth > 0 and math.isfinite(self.bandwidth)):
            raise ValueError(f"bandwidth must be positive, got {self.bandwidth}")
        if self.transform not in (IDENTITY, LOG10):
            raise ValueError(f"unknown transform {self.transform!r}")
        pts = _forward(self.samples, self.transform)
        if not np.all(np.isfinite(pts)):
            raise ValueError("KDE samples must be finite")
        object.__setattr__(self, "points", pts)

    def log_pdf(self, x) -> np.ndarray:
        """Log density at ``x`` (original scale), stable far from the samples."""
        z = (_forward(x, self.transform)[..., None] - self.points) / self.bandwidth
        a = -0.5 * z * z
        peak = a.max(axis=-1)
        return (
            peak
            + np.log(np.exp(a - peak[..., None]).sum(axis=-1))
            - _LOG_SQRT_2PI
            - math.log(len(self.points) * self.bandwidth)
        )

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        n = 1 if size is None else size
        centers = self.points[rng.integers(len(self.points), size=n)]
        draws = centers + self.bandwidth * rng.standard_normal(n)
        if self.bounds is not None:
            lo, hi = _forward(self.bounds, self.transform)
            draws = _fold(draws, float(lo), float(hi))
        out = _inverse(draws, self.transform)
        if self.bounds is not None:
            out = np.clip(out, *self.bounds)
        if self.integer:
            out = np.rint(out).astype(int)
            if self.bounds is not None:
                out = np.clip(out, int(self.bounds[0]), int(self.bounds[1]))
            values = [int(v) for v in out]
        else:
            values = [float(v) for v in out]
        return values[0] if size is None else values


@dataclass(frozen=True)
class CategoricalPmf:
    """Probability table over an ordered choice list."""

    choices: tuple
    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.choices) != len(self.probs) or not self.choices:
            raise ValueError("choices and probs must be non-empty and aligned")
        if any(p <= 0 for p in self.probs):
            raise ValueError("every category needs positive probability")
        if abs(math.fsum(self.probs) - 1.0) > 1e-12:
            raise ValueError("probabilities must sum to 1")

    @property
    def weights(self) -> dict:
        return dict(zip(self.choices, self.probs))

    def _index(self, value) -> int:
        try:
            return self.choices.index(value)
        except ValueError:
            raise ValueError(f"{value!r} is not one of {self.choices}") from None

    def log_pdf(self, x) -> np.ndarray:
        if isinstance(x, (list, tuple, np.ndarray)):
            return np.log([self.probs[self._index(v)] for v in x])
        return np.log(self.probs[self._index(x)])

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        n = 1 if size is None else size
        idx = rng.choice(len(self.choices), size=n, p=np.asarray(self.probs))
        values = [self.choices[int(i)] for i in idx]
        return values[0] if size is None else values


@dataclass(frozen=True)
class UniformDensity:
    """Flat prior density over a numeric domain, in the fitting scale.

    Stands in for an estimator when there are no observations to fit.
    """

    low: float
    high: float
    transform: str = IDENTITY
    integer: bool = False

    @property
    def width(self) -> float:
        lo, hi = _forward([self.low, self.high], self.transform)
        return max(float(hi - lo), 1.0) if self.integer else float(hi - lo)

    def log_pdf(self, x) -> np.ndarray:
        shape = np.shape(x)
        return np.full(shape, -math.log(self.width)) if shape else -math.log(self.width)

    def pdf(self, x):
        return np.exp(self.log_pdf(x))

    def sample(self, rng: np.random.Generator, size: int | None = None):
        n = 1 if size is None else size
        if self.integer:
            values = [int(v) for v in rng.integers(int(self.low), int(self.high) + 1, size=n)]
        else:
            lo, hi = _forward([self.low, self.high], self.transform)
            out = _inverse(rng.uniform(lo, hi, size=n), self.transform)
            values = [float(v) for v in np.clip(out, self.low, self.high)]
        return values[0] if size is None else values


Estimator = Union[NumericKde, CategoricalPmf, UniformDensity]


@dataclass(frozen=True)
class DensityPair:
    """Good-set and bad-set estimators for one parameter."""

    good: Estimator
    bad: Estimator

    def __post_init__(self) -> None:
        good_cat = isinstance(self.good, CategoricalPmf)
        if good_cat != isinstance(self.bad, CategoricalPmf):
            raise ValueError("good and bad estimators must share a domain kind")

    def log_ratio(self, x) -> np.ndarray:
        return self.good.log_pdf(x) - self.bad.log_pdf(x)


def kde_estimate(kde: NumericKde, x: float) -> float:
    """``(1 / (n h)) * sum_i K((x - x_i) / h)`` in the KDE's fitting scale."""
    return float(kde.pdf(x))


def integer_density(kde: NumericKde, k: int) -> float:
    """Density of an integer value: the relaxed KDE evaluated at ``k``."""
    return float(kde.pdf(float(k)))


def sample_from(estimator: Estimator, rng: np.random.Generator, size: int | None = None):
    return estimator.sample(rng, size)


def fit_categorical(
    values: Sequence[Any], domain: ParamDomain, smoothing: float = 1.0
) -> CategoricalPmf:
    """Add-``smoothing`` frequency estimate over ``domain.choices``."""
    if smoothing <= 0:
        raise ValueError("smoothing must be positive")
    choices = domain.choices
    counts = dict.fromkeys(choices, 0)
    for v in values:
        if v not in counts:
            raise ValueError(f"{domain.name}: {v!r} is not one of {choices}")
        counts[v] += 1
    total = len(values) + smoothing * len(choices)
    probs = [(counts[c] + smoothing) / total for c in choices]
    # absorb rounding so the table sums to one exactly enough for the invariant
    probs[-1] = 1.0 - math.fsum(probs[:-1])
    return CategoricalPmf(choices, tuple(probs))


def _fit_scale(domain: ParamDomain) -> tuple[str, float]:
    transform = LOG10 if domain.kind == LOG_CONTINUOUS else IDENTITY
    lo, hi = _forward([domain.low, domain.high], transform)
    width = float(hi - lo)
    if domain.kind == INTEGER:
        width = max(width, 1.0)
    return transform, width


def adaptive_floor(n: int, domain: ParamDomain) -> float:
    """Sample-size dependent bandwidth floor ``width / min(100, n + 1)``.

    Keeps a good-set KDE from shrinking onto a single cluster while few
    observations exist; it fades to 1% of the width as ``n`` grows.
    """
    _, width = _fit_scale(domain)
    return width / min(100, n + 1)


def fit_numeric(
    values: Sequence[float], domain: ParamDomain, min_bandwidth: float = 0.0
) -> NumericKde:
    """Fit a KDE to observed values of a numeric parameter.

    ``min_bandwidth`` (fitting scale) is applied on top of Scott's rule.
    """
    transform, width = _fit_scale(domain)
    h = max(select_bandwidth(_forward(values, transform), width), min_bandwidth)
    return NumericKde(
        tuple(values),
        h,
        transform=transform,
        bounds=(domain.low, domain.high),
        integer=domain.kind == INTEGER,
    )


def uniform_estimator(domain: ParamDomain) -> Estimator:
    if domain.kind == CATEGORICAL:
        return fit_categorical([], domain)
    transform, _ = _fit_scale(domain)
    return UniformDensity(domain.low, domain.high, transform, integer=domain.kind == INTEGER)


def fit_estimator(
    values: Sequence[Any], domain: ParamDomain, adaptive: bool = False
) -> Estimator:
    """Fit the estimator matching ``domain``; no values gives the flat prior."""
    if domain.kind == CATEGORICAL:
        return fit_categorical(values, domain)
    if len(values) == 0:
        return uniform_estimator(domain)
    floor = adaptive_floor(len(values), domain) if adaptive else 0.0
    return fit_numeric(values, domain, floor)


class KdeBlock:
    """Numeric KDEs over several parameters that share one sample set.

    Column ``j`` behaves exactly like the :class:`NumericKde` returned by
    :meth:`column`; evaluating and sampling all columns at once avoids
    per-parameter overhead inside the optimizer loop.
    """

    def __init__(self, values: np.ndarray, domains: Sequence[ParamDomain], adaptive: bool = False):
        values = np.asarray(values, dtype=float)
        if values.ndim != 2 or values.shape[0] == 0 or values.shape[1] != len(domains):
            raise ValueError(f"expected a non-empty (n, {len(domains)}) value matrix")
        self.domains = tuple(domains)
        self.samples = values
        self.log10 = np.array([d.kind == LOG_CONTINUOUS for d in domains])
        self.integer = np.array([d.kind == INTEGER for d in domains])
        self.bounds = np.array([[d.low, d.high] for d in domains], dtype=float).T
        self.points = np.where(self.log10, np.log10(np.where(self.log10, values, 1.0)), values)
        tb = np.where(self.log10, np.log10(np.where(self.log10, self.bounds, 1.0)), self.bounds)
        self.lo, self.hi = tb
        width = self.hi - self.lo
        width = np.where(self.integer, np.maximum(width, 1.0), width)
        n = values.shape[0]
        sigma = self.points.std(axis=0, ddof=1) if n > 1 else np.zeros(values.shape[1])
        h = np.maximum(sigma * n ** -0.2, BANDWIDTH_FLOOR * width)
        if adaptive:
            h = np.maximum(h, width / min(100, n + 1))
        self.bandwidths = h

    def __len__(self) -> int:
        return len(self.domains)

    def column(self, j: int) -> NumericKde:
        d = self.domains[j]
        return NumericKde(
            tuple(self.samples[:, j]),
            float(self.bandwidths[j]),
            transform=LOG10 if self.log10[j] else IDENTITY,
            bounds=(d.low, d.high),
            integer=bool(self.integer[j]),
        )

    def _to_points(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(self.log10, np.log10(np.where(self.log10, x, 1.0)), x)

    def log_pdf(self, x: np.ndarray) -> np.ndarray:
        """Per-column log densities for an ``(m, d)`` matrix of raw values."""
        z = (self._to_points(x)[:, None, :] - self.points[None, :, :]) / self.bandwidths
        a = -0.5 * z * z
        peak = a.max(axis=1)
        return (
            peak
            + np.log(np.exp(a - peak[:, None, :]).sum(axis=1))
            - _LOG_SQRT_2PI
            - np.log(self.points.shape[0] * self.bandwidths)
        )

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """``(m, d)`` draws: kernel centre, Gaussian noise, reflection, rounding."""
        n, d = self.points.shape
        idx = rng.integers(n, size=(m, d))
        draws = self.points[idx, np.arange(d)] + self.bandwidths * rng.standard_normal((m, d))
        draws = _fold(draws, self.lo, self.hi)
        out = draws.copy()
        out[:, self.log10] = np.power(10.0, draws[:, self.log10])
        out = np.clip(out, self.bounds[0], self.bounds[1])
        return np.where(self.integer, np.clip(np.rint(out), self.bounds[0], self.bounds[1]), out)
