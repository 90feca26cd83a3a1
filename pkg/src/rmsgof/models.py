"""One-parameter discrete models and their maximum-likelihood estimators.

A finite model is a :class:`ModelSpec`. Models with infinitely many bins
(the Poisson family) are :class:`InfiniteModel` instances and become a
``ModelSpec`` once :func:`truncate_support` has picked how many leading bins
to keep.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.optimize import minimize_scalar
from scipy.special import gammaln

from .errors import (
    DegenerateProbability,
    EstimateAtBoundary,
    InsufficientData,
    InvalidCounts,
    ModelFileError,
    ParameterOutOfDomain,
    TruncationOverflow,
)

EPS = np.finfo(float).eps
DEFAULT_EPSILON = 1e-8
DEFAULT_MAX_BINS = 10**6


@dataclass(frozen=True)
class BinCounts:
    """Observed number of draws in each bin (bin ``k`` is ``counts[k-1]``)."""

    counts: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.counts)
        if c.ndim != 1 or c.size == 0:
            raise InvalidCounts("counts must be a non-empty vector")
        if not np.issubdtype(c.dtype, np.integer):
            if not np.all(np.isfinite(c)) or np.any(c != np.round(c)):
                raise InvalidCounts("counts must be integers")
        c = c.astype(np.int64)
        if np.any(c < 0):
            raise InvalidCounts("counts must be nonnegative")
        if c.sum() <= 0:
            raise InvalidCounts("at least one draw is required")
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)

    @property
    def m(self) -> int:
        return int(self.counts.sum())

    @property
    def n(self) -> int:
        return int(self.counts.size)

    def fractions(self) -> np.ndarray:
        return self.counts / self.m

    def occupied(self) -> int:
        return int(np.count_nonzero(self.counts))

    @classmethod
    def from_pairs(cls, pairs, n_bins: Optional[int] = None) -> "BinCounts":
        """Build counts from ``(bin_index, count)`` pairs with 1-based indices.

        Bins that never appear get a count of zero; repeated indices add up.
        """
        pairs = list(pairs)
        if not pairs:
            raise InvalidCounts("no counts given")
        top = max(int(k) for k, _ in pairs)
        size = max(top, n_bins or 0)
        out = np.zeros(size, dtype=np.int64)
        for k, c in pairs:
            k = int(k)
            if k < 1:
                raise InvalidCounts(f"bin indices are 1-based, got {k}")
            if int(c) != c:
                raise InvalidCounts(f"count for bin {k} is not an integer: {c}")
            out[k - 1] += int(c)
        return cls(out)

    def padded(self, n: int) -> "BinCounts":
        """Counts restricted or zero-padded to exactly ``n`` bins."""
        if self.n == n:
            return self
        if self.n < n:
            return BinCounts(np.concatenate([self.counts, np.zeros(n - self.n, np.int64)]))
        if np.any(self.counts[n:]):
            raise InvalidCounts(f"draws recorded in bins beyond the model's {n} bins")
        return BinCounts(self.counts[:n].copy())


@dataclass(frozen=True)
class ModelSpec:
    """A one-parameter family of distributions over ``n_bins`` bins.

    ``prob`` maps theta to the probability vector and ``mle`` maps a vector
    of fractions to the maximum-likelihood estimate. ``dlog_prob`` is the
    analytic derivative of the log-probabilities; when it is ``None``,
    :func:`dlog_probabilities` falls back to centered finite differences.
    """

    name: str
    n_bins: int
    theta_domain: tuple[float, float]
    prob: Callable[[float], np.ndarray]
    mle: Callable[[np.ndarray], float]
    dlog_prob: Optional[Callable[[float], np.ndarray]] = None
    description: str = ""
    params: dict = field(default_factory=dict)

    @property
    def analytic_derivative(self) -> bool:
        return self.dlog_prob is not None

    def contains(self, theta: float) -> bool:
        lo, hi = self.theta_domain
        return bool(lo < theta < hi)


@dataclass(frozen=True)
class InfiniteModel:
    """A model over bins 1, 2, 3, ... that must be truncated before use.

    ``log_prob_prefix(theta, n)`` returns the log-probabilities of the first
    ``n`` bins and ``dlog_prob_prefix(theta, n)`` their theta-derivatives.
    ``mle`` accepts fractions of any length. ``sampler(rng, theta, m)``, if
    given, draws counts from the untruncated distribution.
    """

    name: str
    theta_domain: tuple[float, float]
    log_prob_prefix: Callable[[float, int], np.ndarray]
    dlog_prob_prefix: Callable[[float, int], np.ndarray]
    mle: Callable[[np.ndarray], float]
    sampler: Optional[Callable[[np.random.Generator, float, int], np.ndarray]] = None
    epsilon: float = DEFAULT_EPSILON
    max_bins: int = DEFAULT_MAX_BINS
    description: str = ""
    params: dict = field(default_factory=dict)

    analytic_derivative = True

    def contains(self, theta: float) -> bool:
        lo, hi = self.theta_domain
        return bool(lo < theta < hi)


AnyModel = Union[ModelSpec, InfiniteModel]


def _check_domain(model: AnyModel, theta: float) -> float:
    theta = float(theta)
    if not (math.isfinite(theta) and model.contains(theta)):
        lo, hi = model.theta_domain
        raise ParameterOutOfDomain(
            f"theta={theta!r} is outside the domain ({lo}, {hi}) of model {model.name!r}"
        )
    return theta


def _checked(p: np.ndarray, model_name: str, theta: float) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    if not np.all(p > 0):
        k = int(np.argmin(p)) + 1
        raise DegenerateProbability(
            f"model {model_name!r} gives p_{k}={p[k - 1]!r} at theta={theta!r}"
        )
    return p


def truncate_support(
    model: AnyModel,
    theta: float,
    epsilon: Optional[float] = None,
    max_bins: Optional[int] = None,
) -> ModelSpec:
    """Keep the fewest leading bins whose total probability is at least 1 - epsilon.

    The retained probabilities are not renormalized. Finite models are
    returned unchanged.
    """
    if isinstance(model, ModelSpec):
        return model
    theta = _check_domain(model, theta)
    eps = model.epsilon if epsilon is None else float(epsilon)
    cap = model.max_bins if max_bins is None else int(max_bins)
    if not 0.0 < eps < 1.0:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")

    n = 64
    while True:
        mass = np.cumsum(np.exp(model.log_prob_prefix(theta, min(n, cap))))
        hit = np.flatnonzero(mass >= 1.0 - eps)
        if hit.size:
            n_keep = int(hit[0]) + 1
            break
        if n >= cap:
            raise TruncationOverflow(
                f"more than {cap} bins needed to retain mass 1-{eps:g} at theta={theta}"
            )
        n *= 4

    def prob(t, _n=n_keep):
        return np.exp(model.log_prob_prefix(t, _n))

    def dlog_prob(t, _n=n_keep):
        return model.dlog_prob_prefix(t, _n)

    return ModelSpec(
        name=model.name,
        n_bins=n_keep,
        theta_domain=model.theta_domain,
        prob=prob,
        mle=model.mle,
        dlog_prob=dlog_prob,
        description=model.description,
        params={**model.params, "epsilon": eps, "truncated_at": theta},
    )


def probabilities(model: AnyModel, theta: float) -> np.ndarray:
    theta = _check_domain(model, theta)
    if isinstance(model, InfiniteModel):
        model = truncate_support(model, theta)
    return _checked(model.prob(theta), model.name, theta)


def finite_difference_step(theta: float) -> float:
    return EPS ** (1.0 / 3.0) * max(1.0, abs(theta))


def dlog_probabilities(model: AnyModel, theta: float) -> np.ndarray:
    """Derivative of ``ln p_k`` with respect to theta, for every bin."""
    theta = _check_domain(model, theta)
    if isinstance(model, InfiniteModel):
        model = truncate_support(model, theta)
    if model.dlog_prob is not None:
        return np.asarray(model.dlog_prob(theta), dtype=float)

    h = finite_difference_step(theta)
    lo, hi = model.theta_domain
    # keep both stencil points inside the domain
    h = min(h, 0.5 * (theta - lo), 0.5 * (hi - theta))
    up = _checked(model.prob(theta + h), model.name, theta + h)
    down = _checked(model.prob(theta - h), model.name, theta - h)
    return (np.log(up) - np.log(down)) / (2.0 * h)


def mle_estimate(model: AnyModel, counts: BinCounts) -> float:
    """Maximum-likelihood estimate of theta from observed counts.

    Raises :class:`InsufficientData` unless at least two bins are occupied
    and :class:`EstimateAtBoundary` when the likelihood has no interior
    maximum.
    """
    if isinstance(model, ModelSpec):
        counts = counts.padded(model.n_bins)
    if counts.occupied() < 2:
        raise InsufficientData("at least two distinct bins must contain draws")
    theta = float(model.mle(counts.fractions()))
    if not (math.isfinite(theta) and model.contains(theta)):
        lo, hi = model.theta_domain
        raise EstimateAtBoundary(
            f"maximum-likelihood estimate {theta!r} is not inside ({lo}, {hi})"
        )
    return theta


def score(model: AnyModel, fractions: np.ndarray, theta: float) -> float:
    """Derivative of the per-draw log-likelihood, ``sum_k Y_k d/dtheta ln p_k``."""
    d = dlog_probabilities(model, theta)
    y = np.asarray(fractions, dtype=float)
    if y.size > d.size:
        y = y[: d.size]
    return float(np.dot(y, d[: y.size]))


# -- built-in models ---------------------------------------------------------

_CONTINGENCY_ROWS = np.array([0.04, 0.04, 0.96, 0.96])


def contingency2x2() -> ModelSpec:
    def prob(theta):
        return _CONTINGENCY_ROWS * np.array([theta, 1 - theta, theta, 1 - theta])

    def dlog_prob(theta):
        a, b = 1.0 / theta, -1.0 / (1.0 - theta)
        return np.array([a, b, a, b])

    def mle(y):
        return y[0] + y[2]

    return ModelSpec(
        name="contingency2x2",
        n_bins=4,
        theta_domain=(0.0, 1.0),
        prob=prob,
        mle=mle,
        dlog_prob=dlog_prob,
        description=(
            "2x2 contingency table: p_1 = .04*theta, p_2 = .04*(1-theta), "
            "p_3 = .96*theta, p_4 = .96*(1-theta); theta_hat = Y_1 + Y_3"
        ),
    )


def _zipf_weights(theta: float, logk: np.ndarray) -> np.ndarray:
    a = -theta * logk
    w = np.exp(a - a.max())
    return w / w.sum()


def zipf_mean_log(theta: float, logk: np.ndarray) -> float:
    """Expected ``ln k`` under the Zipf distribution with exponent theta."""
    return float(np.dot(_zipf_weights(theta, logk), logk))


def _zipf_mle(y, logk, domain, max_expansions=200):
    target = float(np.dot(y, logk[: len(y)]))

    def g(t):
        return zipf_mean_log(t, logk) - target

    lo_lim, hi_lim = domain
    lo, hi = -1.0, 1.0
    g_lo, g_hi = g(lo), g(hi)
    # g is decreasing in theta, so the root lies where g changes from + to -
    for _ in range(max_expansions):
        if g_lo >= 0.0 >= g_hi:
            break
        if g_lo < 0.0:
            if lo <= lo_lim:
                return lo_lim
            lo = max(2.0 * lo, lo_lim)
            g_lo = g(lo)
        if g_hi > 0.0:
            if hi >= hi_lim:
                return hi_lim
            hi = min(2.0 * hi, hi_lim)
            g_hi = g(hi)
    else:
        return math.nan
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi

    while hi - lo > 1e-12 * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        g_mid = g(mid)
        if g_mid == 0.0:
            return mid
        if g_mid > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def zipf(n: int = 100, theta_domain: tuple[float, float] = (-50.0, 50.0)) -> ModelSpec:
    if n < 2:
        raise ValueError("the Zipf model needs at least 2 bins")
    logk = np.log(np.arange(1, n + 1, dtype=float))

    def prob(theta):
        return _zipf_weights(theta, logk)

    def dlog_prob(theta):
        return zipf_mean_log(theta, logk) - logk

    def mle(y):
        return _zipf_mle(np.asarray(y, dtype=float), logk, theta_domain)

    return ModelSpec(
        name="zipf",
        n_bins=n,
        theta_domain=theta_domain,
        prob=prob,
        mle=mle,
        dlog_prob=dlog_prob,
        description=(
            f"Zipf on {n} bins: p_k = k^-theta / sum_i i^-theta; theta_hat = f^-1(sum_k Y_k ln k) "
            "with f(theta) = sum_k k^-theta ln k / sum_k k^-theta, solved by bisection"
        ),
        params={"n": n},
    )


def _poisson_sampler(rng, theta, m):
    return np.bincount(rng.poisson(theta, size=m))


def poisson(epsilon: float = DEFAULT_EPSILON, max_bins: int = DEFAULT_MAX_BINS) -> InfiniteModel:
    def log_prob_prefix(theta, n):
        j = np.arange(n, dtype=float)
        return -theta + j * math.log(theta) - gammaln(j + 1.0)

    def dlog_prob_prefix(theta, n):
        return np.arange(n, dtype=float) / theta - 1.0

    def mle(y):
        y = np.asarray(y, dtype=float)
        return float(np.dot(np.arange(y.size, dtype=float), y))

    return InfiniteModel(
        name="poisson",
        theta_domain=(0.0, float(DEFAULT_MAX_BINS)),
        log_prob_prefix=log_prob_prefix,
        dlog_prob_prefix=dlog_prob_prefix,
        mle=mle,
        sampler=_poisson_sampler,
        epsilon=epsilon,
        max_bins=max_bins,
        description=(
            "Poisson: p_k = exp(-theta) theta^(k-1) / (k-1)!; theta_hat = sum_k (k-1) Y_k; "
            f"truncated to the fewest leading bins holding mass >= 1 - epsilon (epsilon={epsilon:g})"
        ),
        params={"epsilon": epsilon},
    )


BUILTIN = {
    "contingency2x2": contingency2x2,
    "zipf": zipf,
    "poisson": poisson,
}


def get_model(name: str, **kwargs) -> AnyModel:
    """Instantiate a built-in model by name, ignoring arguments it does not take."""
    try:
        factory = BUILTIN[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; choose from {sorted(BUILTIN)}") from None
    accepted = {
        "contingency2x2": (),
        "zipf": ("n",),
        "poisson": ("epsilon", "max_bins"),
    }[name]
    return factory(**{k: v for k, v in kwargs.items() if k in accepted and v is not None})


# -- user-supplied tabulated models -----------------------------------------


def likelihood_mle(prob: Callable[[float], np.ndarray], domain: tuple[float, float]):
    """Generic estimator: maximize sum_k Y_k ln p_k(theta) over the domain."""
    lo, hi = domain
    width = hi - lo
    xatol = 1e-10 * max(1.0, abs(lo), abs(hi))

    def mle(y):
        y = np.asarray(y, dtype=float)
        mask = y > 0

        def nll(t):
            p = prob(t)[mask]
            if np.any(p <= 0):
                return math.inf
            return -float(np.dot(y[mask], np.log(p)))

        res = minimize_scalar(nll, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
        t = float(res.x)
        if min(t - lo, hi - t) <= 1e-6 * width:
            return lo if t - lo < hi - t else hi
        return t

    return mle


def tabulated_model(thetas, table, name: str = "tabulated") -> ModelSpec:
    """Model interpolated (monotone cubic) between tabulated probability rows.

    Derivatives come from finite differences, so the result is approximate.
    """
    thetas = np.asarray(thetas, dtype=float)
    table = np.asarray(table, dtype=float)
    order = np.argsort(thetas)
    thetas, table = thetas[order], table[order]
    if thetas.size < 2 or np.any(np.diff(thetas) <= 0):
        raise ModelFileError("need at least two distinct theta rows")
    if np.any(table < 0) or not np.all(np.isfinite(table)):
        raise ModelFileError("tabulated probabilities must be finite and nonnegative")
    interp = PchipInterpolator(thetas, table, axis=0, extrapolate=False)
    domain = (float(thetas[0]), float(thetas[-1]))

    def prob(theta):
        p = np.clip(interp(theta), 0.0, None)
        return p / p.sum()

    return ModelSpec(
        name=name,
        n_bins=int(table.shape[1]),
        theta_domain=domain,
        prob=prob,
        mle=likelihood_mle(prob, domain),
        dlog_prob=None,
        description=f"tabulated model on {table.shape[1]} bins over theta in {domain} (approximate)",
    )


def load_tabulated_model(path) -> ModelSpec:
    """Read a model file: a line ``n=<int>`` then rows ``theta,p_1,...,p_n``."""
    with open(path, newline="") as fh:
        lines = [ln for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ModelFileError(f"{path}: empty model file")
    head = lines[0].strip().replace(" ", "")
    if not head.startswith("n="):
        raise ModelFileError(f"{path}: first line must be 'n=<int>', got {lines[0].strip()!r}")
    try:
        n = int(head[2:])
    except ValueError:
        raise ModelFileError(f"{path}: bad bin count {head[2:]!r}") from None
    thetas, rows = [], []
    for lineno, rec in enumerate(csv.reader(lines[1:]), start=2):
        try:
            vals = [float(v) for v in rec]
        except ValueError:
            raise ModelFileError(f"{path}:{lineno}: non-numeric entry") from None
        if len(vals) != n + 1:
            raise ModelFileError(f"{path}:{lineno}: expected {n + 1} columns, got {len(vals)}")
        thetas.append(vals[0])
        rows.append(vals[1:])
    return tabulated_model(thetas, rows, name=f"file:{path}")
