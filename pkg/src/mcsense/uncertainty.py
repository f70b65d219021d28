"""Uncertainty analysis of model outputs.

Descriptive statistics, percentiles (type-7 linear interpolation),
histogram and ECDF data, plus two distribution-free bounds: the Chebyshev
inequality interval around the mean and the Dvoretzky-Kiefer-Wolfowitz
simultaneous band around the empirical CDF (conservative relative to exact
Kolmogorov critical values).
"""

from __future__ import annotations

from dataclasses import dataclass
import io
import math

import numpy as np

from .errors import ParameterError
from .runner import OutputVector

__all__ = ["UaSummary", "summarize", "tchebycheff_bound",
           "kolmogorov_band", "sign_fraction"]

DEFAULT_PERCENTILES = (1.0, 5.0, 25.0, 50.0, 75.0, 95.0, 99.0)


@dataclass(frozen=True)
class UaSummary:
    name: str
    n_effective: int
    n_faults: int
    mean: float
    sd: float                    # n-1 denominator
    minimum: float
    maximum: float
    skewness: float
    percentiles: tuple           # (probability percent, value) pairs
    hist_edges: np.ndarray
    hist_counts: np.ndarray
    ecdf_x: np.ndarray
    ecdf_f: np.ndarray
    coverage: float
    tchebycheff: tuple           # (low, high)
    kolmogorov_eps: float
    positive_fraction: float

    def to_csv(self) -> str:
        """One statistic per line: ``statistic,value``."""
        buf = io.StringIO()
        buf.write("statistic,value\n")
        rows = [
            ("output", self.name),
            ("n_effective", self.n_effective),
            ("n_faults", self.n_faults),
            ("mean", _fmt(self.mean)),
            ("sd", _fmt(self.sd)),
            ("min", _fmt(self.minimum)),
            ("max", _fmt(self.maximum)),
            ("skewness", _fmt(self.skewness)),
        ]
        for p, v in self.percentiles:
            rows.append((f"p{_fmt_p(p)}", _fmt(v)))
        rows += [
            ("coverage", _fmt(self.coverage)),
            ("tchebycheff_low", _fmt(self.tchebycheff[0])),
            ("tchebycheff_high", _fmt(self.tchebycheff[1])),
            ("kolmogorov_eps", _fmt(self.kolmogorov_eps)),
            ("positive_fraction", _fmt(self.positive_fraction)),
        ]
        for key, val in rows:
            buf.write(f"{key},{val}\n")
        return buf.getvalue()


def _fmt(v: float) -> str:
    return f"{v:.12g}"


def _fmt_p(p: float) -> str:
    return f"{p:g}"


def _clean(y: OutputVector | np.ndarray) -> tuple[np.ndarray, int, str]:
    if isinstance(y, OutputVector):
        vals = y.y[y.valid_mask()]
        return vals, len(y.fault_rows), y.name
    vals = np.asarray(y, dtype=float)
    finite = np.isfinite(vals)
    return vals[finite], int((~finite).sum()), "y"


def summarize(y, percentiles=DEFAULT_PERCENTILES, bins: int | None = None,
              alpha: float = 0.05) -> UaSummary:
    """Full UA summary of one output vector.

    ``alpha`` sets both bounds: the Chebyshev interval targets coverage
    1 - alpha and the DKW band holds with probability >= 1 - alpha. The
    histogram defaults to ceil(1 + log2 n) bins.
    """
    vals, n_faults, name = _clean(y)
    n = len(vals)
    if n < 2:
        raise ParameterError(f"need at least 2 valid values, got {n}")
    if bins is None:
        bins = math.ceil(1.0 + math.log2(n))
    mean = float(vals.mean())
    sd = float(vals.std(ddof=1))
    m2 = float(((vals - mean) ** 2).mean())
    m3 = float(((vals - mean) ** 3).mean())
    skew = m3 / m2**1.5 if m2 > 0 else 0.0
    plist = tuple(float(p) for p in percentiles)
    pvals = np.percentile(vals, plist, method="linear")
    counts, edges = np.histogram(vals, bins=bins)
    order = np.sort(vals)
    coverage = 1.0 - alpha
    return UaSummary(
        name=name,
        n_effective=n,
        n_faults=n_faults,
        mean=mean,
        sd=sd,
        minimum=float(order[0]),
        maximum=float(order[-1]),
        skewness=skew,
        percentiles=tuple(zip(plist, (float(v) for v in pvals))),
        hist_edges=edges,
        hist_counts=counts,
        ecdf_x=order,
        ecdf_f=np.arange(1, n + 1) / n,
        coverage=coverage,
        tchebycheff=tchebycheff_bound(mean, sd, coverage),
        kolmogorov_eps=kolmogorov_band(n, alpha),
        positive_fraction=sign_fraction(vals),
    )


def tchebycheff_bound(mean: float, sd: float, coverage: float) -> tuple[float, float]:
    """Chebyshev interval mean +/- k*sd with k = 1/sqrt(1 - coverage).

    Holds for any distribution: at least ``coverage`` of the mass lies
    inside.
    """
    if not 0.0 < coverage < 1.0:
        raise ParameterError(f"coverage must lie in (0, 1), got {coverage}")
    if sd < 0:
        raise ParameterError("sd must be nonnegative")
    k = 1.0 / math.sqrt(1.0 - coverage)
    return (mean - k * sd, mean + k * sd)


def kolmogorov_band(n: int, alpha: float) -> float:
    """Halfwidth of the DKW simultaneous CDF band:
    eps = sqrt(ln(2/alpha) / (2n))."""
    if n < 1:
        raise ParameterError("n must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


def sign_fraction(y) -> float:
    """Fraction of strictly positive values among the valid entries."""
    vals, _, _ = _clean(y)
    if len(vals) == 0:
        raise ParameterError("need at least one valid value")
    return float((vals > 0).sum() / len(vals))
