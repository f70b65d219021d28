"""Marginal input distributions and the factor space.

Every distribution exposes ``quantile`` (inverse CDF, used to map unit
hypercube samples to factor values), ``cdf``, and analytic ``mean`` /
``variance``. Construction never raises on bad parameters: problems are
collected by ``param_errors`` so a whole configuration can be validated in
one pass; ``quantile``/``cdf`` refuse to run on an invalid distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields
import math

import numpy as np
from scipy import special

from .errors import ConfigError, ParameterError

__all__ = [
    "Distribution", "Uniform", "LogUniform", "Normal", "TruncNormal",
    "LogNormal", "Triangular", "Beta", "DiscreteWeighted",
    "Factor", "FactorSpace", "ValidationReport",
    "dist_from_config", "validate",
]


def _check_p(p):
    p = np.asarray(p, dtype=float)
    if np.any((p < 0.0) | (p > 1.0)):
        raise ParameterError("probability must lie in [0, 1]")
    return p


class Distribution:
    """Base class; subclasses are frozen dataclasses with a ``tag``."""

    tag = "?"

    def param_errors(self) -> list[str]:
        """Return human-readable parameter violations (empty if valid)."""
        raise NotImplementedError

    def _require_valid(self):
        errs = self.param_errors()
        if errs:
            raise ParameterError(f"invalid {self.tag} distribution: " + "; ".join(errs))

    def quantile(self, p):
        """Inverse CDF at probability ``p`` (scalar or array)."""
        self._require_valid()
        p = _check_p(p)
        out = self._quantile(p)
        return float(out) if np.ndim(p) == 0 else out

    def cdf(self, x):
        """CDF at ``x`` (scalar or array)."""
        self._require_valid()
        x = np.asarray(x, dtype=float)
        out = self._cdf(x)
        return float(out) if np.ndim(x) == 0 else out

    def mean(self) -> float:
        raise NotImplementedError

    def variance(self) -> float:
        raise NotImplementedError

    def params_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class Uniform(Distribution):
    """Uniform on [lower, upper]."""

    lower: float
    upper: float
    tag = "uniform"

    def param_errors(self):
        return [] if self.lower < self.upper else ["requires lower < upper"]

    def _quantile(self, p):
        return self.lower + p * (self.upper - self.lower)

    def _cdf(self, x):
        return np.clip((x - self.lower) / (self.upper - self.lower), 0.0, 1.0)

    def mean(self):
        return 0.5 * (self.lower + self.upper)

    def variance(self):
        return (self.upper - self.lower) ** 2 / 12.0


@dataclass(frozen=True)
class LogUniform(Distribution):
    """log(X) uniform on [log lower, log upper]; requires lower > 0."""

    lower: float
    upper: float
    tag = "loguniform"

    def param_errors(self):
        errs = []
        if self.lower <= 0:
            errs.append("requires lower > 0")
        if not self.lower < self.upper:
            errs.append("requires lower < upper")
        return errs

    def _quantile(self, p):
        return np.exp(np.log(self.lower) + p * (np.log(self.upper) - np.log(self.lower)))

    def _cdf(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            f = (np.log(x) - math.log(self.lower)) / (math.log(self.upper) - math.log(self.lower))
            f = np.where(x <= self.lower, 0.0, f)
        return np.clip(f, 0.0, 1.0)

    def mean(self):
        return (self.upper - self.lower) / math.log(self.upper / self.lower)

    def variance(self):
        r = math.log(self.upper / self.lower)
        return (self.upper**2 - self.lower**2) / (2.0 * r) - self.mean() ** 2


@dataclass(frozen=True)
class Normal(Distribution):
    """Gaussian with mean ``mean_`` and standard deviation ``sd``.

    Unbounded: quantile(0) and quantile(1) are -inf/+inf. Designs that hit
    the exact ends of the unit interval (e.g. Morris grids) therefore
    produce infinite values, which downstream evaluation reports as faults;
    use TruncNormal for grid-based designs.
    """

    mean_: float
    sd: float
    tag = "normal"

    def param_errors(self):
        return [] if self.sd > 0 else ["requires sd > 0"]

    def _quantile(self, p):
        with np.errstate(divide="ignore"):
            return self.mean_ + self.sd * special.ndtri(p)

    def _cdf(self, x):
        return special.ndtr((x - self.mean_) / self.sd)

    def mean(self):
        return self.mean_

    def variance(self):
        return self.sd**2


@dataclass(frozen=True)
class TruncNormal(Distribution):
    """Normal(mean_, sd) truncated to [lower, upper], CDF-rescaled."""

    mean_: float
    sd: float
    lower: float
    upper: float
    tag = "truncnormal"

    def param_errors(self):
        errs = []
        if self.sd <= 0:
            errs.append("requires sd > 0")
        if not self.lower < self.upper:
            errs.append("requires lower < upper")
        return errs

    def _bounds_z(self):
        a = (self.lower - self.mean_) / self.sd
        b = (self.upper - self.mean_) / self.sd
        return a, b

    def _quantile(self, p):
        a, b = self._bounds_z()
        fa, fb = special.ndtr(a), special.ndtr(b)
        with np.errstate(divide="ignore"):
            z = special.ndtri(fa + p * (fb - fa))
        return np.clip(self.mean_ + self.sd * z, self.lower, self.upper)

    def _cdf(self, x):
        a, b = self._bounds_z()
        fa, fb = special.ndtr(a), special.ndtr(b)
        f = (special.ndtr((x - self.mean_) / self.sd) - fa) / (fb - fa)
        return np.clip(f, 0.0, 1.0)

    def mean(self):
        a, b = self._bounds_z()
        z = special.ndtr(b) - special.ndtr(a)
        phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
        return self.mean_ + self.sd * (phi(a) - phi(b)) / z

    def variance(self):
        a, b = self._bounds_z()
        z = special.ndtr(b) - special.ndtr(a)
        phi = lambda t: math.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)
        d = (phi(a) - phi(b)) / z
        return self.sd**2 * (1.0 + (a * phi(a) - b * phi(b)) / z - d * d)


@dataclass(frozen=True)
class LogNormal(Distribution):
    """exp(N(mu, sigma)); mu/sigma parameterize the underlying normal."""

    mu: float
    sigma: float
    tag = "lognormal"

    def param_errors(self):
        return [] if self.sigma > 0 else ["requires sigma > 0"]

    def _quantile(self, p):
        with np.errstate(divide="ignore"):
            return np.exp(self.mu + self.sigma * special.ndtri(p))

    def _cdf(self, x):
        with np.errstate(divide="ignore", invalid="ignore"):
            f = special.ndtr((np.log(x) - self.mu) / self.sigma)
        return np.where(x <= 0.0, 0.0, f)

    def mean(self):
        return math.exp(self.mu + 0.5 * self.sigma**2)

    def variance(self):
        return (math.exp(self.sigma**2) - 1.0) * math.exp(2 * self.mu + self.sigma**2)


@dataclass(frozen=True)
class Triangular(Distribution):
    """Triangular on [lower, upper] with the given mode."""

    lower: float
    mode: float
    upper: float
    tag = "triangular"

    def param_errors(self):
        errs = []
        if not self.lower < self.upper:
            errs.append("requires lower < upper")
        if not self.lower <= self.mode <= self.upper:
            errs.append("requires lower <= mode <= upper")
        return errs

    def _quantile(self, p):
        a, c, b = self.lower, self.mode, self.upper
        fc = (c - a) / (b - a)
        left = a + np.sqrt(p * (b - a) * (c - a))
        right = b - np.sqrt((1.0 - p) * (b - a) * (b - c))
        return np.where(p <= fc, left, right) if fc > 0 else right

    def _cdf(self, x):
        a, c, b = self.lower, self.mode, self.upper
        with np.errstate(divide="ignore", invalid="ignore"):
            left = np.where(c > a, (x - a) ** 2 / ((b - a) * (c - a)), 0.0)
            right = np.where(c < b, 1.0 - (b - x) ** 2 / ((b - a) * (b - c)), 1.0)
        f = np.where(x <= c, left, right)
        return np.clip(np.where(x <= a, 0.0, np.where(x >= b, 1.0, f)), 0.0, 1.0)

    def mean(self):
        return (self.lower + self.mode + self.upper) / 3.0

    def variance(self):
        a, c, b = self.lower, self.mode, self.upper
        return (a * a + b * b + c * c - a * b - a * c - b * c) / 18.0


@dataclass(frozen=True)
class Beta(Distribution):
    """Beta(alpha, beta) rescaled to [lower, upper]."""

    alpha: float
    beta: float
    lower: float = 0.0
    upper: float = 1.0
    tag = "beta"

    def param_errors(self):
        errs = []
        if self.alpha <= 0:
            errs.append("requires alpha > 0")
        if self.beta <= 0:
            errs.append("requires beta > 0")
        if not self.lower < self.upper:
            errs.append("requires lower < upper")
        return errs

    def _quantile(self, p):
        z = special.betaincinv(self.alpha, self.beta, p)
        return self.lower + (self.upper - self.lower) * z

    def _cdf(self, x):
        z = np.clip((x - self.lower) / (self.upper - self.lower), 0.0, 1.0)
        return special.betainc(self.alpha, self.beta, z)

    def mean(self):
        return self.lower + (self.upper - self.lower) * self.alpha / (self.alpha + self.beta)

    def variance(self):
        ab = self.alpha + self.beta
        return (self.upper - self.lower) ** 2 * self.alpha * self.beta / (ab**2 * (ab + 1.0))


@dataclass(frozen=True)
class DiscreteWeighted(Distribution):
    """Finite discrete distribution.

    Value/weight pairs are sorted by value and weights normalized to sum 1
    on construction (when valid). The quantile uses the right-continuous
    step convention: a probability exactly on a cumulative boundary maps to
    the next (higher) value.
    """

    values: tuple = field(default=())
    weights: tuple = field(default=())
    tag = "discrete"

    def __post_init__(self):
        vals = tuple(float(v) for v in self.values)
        wts = tuple(float(w) for w in self.weights)
        if vals and len(vals) == len(wts) and all(w >= 0 for w in wts) and sum(wts) > 0:
            order = np.argsort(vals, kind="stable")
            total = sum(wts)
            vals = tuple(vals[i] for i in order)
            wts = tuple(wts[i] / total for i in order)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "weights", wts)

    def param_errors(self):
        errs = []
        if not self.values:
            errs.append("requires at least one value")
        if len(self.values) != len(self.weights):
            errs.append("values and weights must have equal length")
        if any(w < 0 for w in self.weights):
            errs.append("weights must be nonnegative")
        if self.weights and sum(self.weights) <= 0:
            errs.append("weights must not all be zero")
        return errs

    def _cum(self):
        return np.cumsum(self.weights)

    def _quantile(self, p):
        idx = np.searchsorted(self._cum(), p, side="right")
        idx = np.minimum(idx, len(self.values) - 1)
        return np.asarray(self.values, dtype=float)[idx]

    def _cdf(self, x):
        vals = np.asarray(self.values, dtype=float)
        cum = self._cum()
        idx = np.searchsorted(vals, x, side="right")
        out = np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)
        return np.clip(out, 0.0, 1.0)

    def mean(self):
        self._require_valid()
        return float(np.dot(self.values, self.weights))

    def variance(self):
        self._require_valid()
        m = self.mean()
        return float(np.dot(self.weights, (np.asarray(self.values) - m) ** 2))


_DIST_BY_TAG = {
    cls.tag: cls
    for cls in (Uniform, LogUniform, Normal, TruncNormal, LogNormal,
                Triangular, Beta, DiscreteWeighted)
}

# JSON parameter name -> dataclass field name, where they differ
_PARAM_ALIASES = {"mean": "mean_"}


def dist_from_config(tag: str, params: dict) -> Distribution:
    """Build a distribution from its JSON tag and parameter mapping.

    Raises ConfigError for unknown tags or parameter names; parameter
    *values* are not checked here (see ``param_errors``/``validate``).
    """
    cls = _DIST_BY_TAG.get(tag)
    if cls is None:
        raise ConfigError(
            f"unknown distribution '{tag}' (expected one of {sorted(_DIST_BY_TAG)})"
        )
    kwargs = {}
    for key, val in params.items():
        name = _PARAM_ALIASES.get(key, key)
        if name not in {f.name for f in fields(cls)}:
            raise ConfigError(f"distribution '{tag}' has no parameter '{key}'")
        if name in ("values", "weights"):
            val = tuple(val)
        kwargs[name] = val
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"distribution '{tag}': {exc}") from None


@dataclass(frozen=True)
class Factor:
    """A named uncertain input with a marginal distribution."""

    name: str
    dist: Distribution


@dataclass(frozen=True)
class ValidationReport:
    problems: tuple

    @property
    def ok(self) -> bool:
        return not self.problems

    def __str__(self):
        return "OK" if self.ok else "\n".join(self.problems)


@dataclass(frozen=True)
class FactorSpace:
    """Ordered collection of factors plus an optional Spearman target.

    ``correlation_target`` is a k x k array of target Spearman rank
    correlations, applied by the Iman-Conover reordering at sampling time.
    """

    factors: tuple
    correlation_target: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if self.correlation_target is not None:
            object.__setattr__(
                self, "correlation_target",
                np.array(self.correlation_target, dtype=float),
            )

    def __len__(self):
        return len(self.factors)

    @property
    def names(self) -> list[str]:
        return [f.name for f in self.factors]

    def factor(self, name: str) -> Factor:
        for f in self.factors:
            if f.name == name:
                return f
        raise KeyError(name)

    def validate(self) -> ValidationReport:
        """Collect every violation; an empty report means the space is usable."""
        problems = []
        seen = set()
        for i, f in enumerate(self.factors):
            if not f.name:
                problems.append(f"factor {i}: empty name")
            if f.name in seen:
                problems.append(f"duplicate factor name '{f.name}'")
            seen.add(f.name)
            for err in f.dist.param_errors():
                problems.append(f"factor '{f.name}' ({f.dist.tag}): {err}")
        c = self.correlation_target
        if c is not None:
            k = len(self.factors)
            if c.shape != (k, k):
                problems.append(
                    f"correlation target must be {k}x{k}, got {c.shape[0]}x{c.shape[1]}"
                    if c.ndim == 2 else "correlation target must be a square matrix"
                )
            else:
                if not np.allclose(c, c.T, atol=1e-12):
                    problems.append("correlation target is not symmetric")
                if not np.allclose(np.diag(c), 1.0, atol=1e-12):
                    problems.append("correlation target diagonal must be 1")
                if np.any(np.abs(c) > 1.0 + 1e-12):
                    problems.append("correlation target entries must lie in [-1, 1]")
        return ValidationReport(tuple(problems))

    @classmethod
    def from_dict(cls, doc: dict) -> "FactorSpace":
        """Build a FactorSpace from the ``factors``/``correlation`` keys of a
        JSON configuration document."""
        try:
            raw = doc["factors"]
        except (KeyError, TypeError):
            raise ConfigError("configuration must contain a 'factors' array") from None
        if not isinstance(raw, list) or not raw:
            raise ConfigError("'factors' must be a nonempty array")
        factors = []
        for i, item in enumerate(raw):
            if not isinstance(item, dict):
                raise ConfigError(f"factors[{i}] must be an object")
            try:
                name = item["name"]
                tag = item["dist"]
            except KeyError as exc:
                raise ConfigError(f"factors[{i}] is missing key {exc}") from None
            params = item.get("params", {})
            factors.append(Factor(str(name), dist_from_config(tag, params)))
        corr = doc.get("correlation")
        target = None
        if corr is not None:
            try:
                target = np.array(corr, dtype=float)
            except (TypeError, ValueError):
                raise ConfigError("'correlation' must be an array of numeric arrays") from None
        return cls(tuple(factors), target)


def validate(space: FactorSpace) -> ValidationReport:
    """Module-level alias for ``FactorSpace.validate``."""
    return space.validate()
