"""Sensitivity estimators.

Families implemented:

* regression/correlation screening (SRC, PCC, PEAR and their rank
  counterparts SRRC, PRCC, SPEA, with R^2 on both scales);
* elementary-effects screening (mu, mu*, sigma) on one-at-a-time designs;
* variance-based first-order and total indices from Fourier-curve designs
  (classic or extended mode, optionally by groups);
* variance-based indices from the two-matrix scheme (first-order by the
  correlation-form estimator, totals by Jansen's difference form);
* a binned conditional-mean importance measure usable under correlated
  inputs.

A zero-variance output makes variance-based indices undefined; they are
reported as NaN with the report flagged degenerate, never as zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io
import math

import numpy as np
from scipy import linalg
from scipy.stats import rankdata

from .design import FastMeta, MorrisMeta, SampleMatrix, SobolMeta, sobol_design
from .distributions import FactorSpace
from .errors import CollinearityError, DesignMismatchError, ParameterError
from .runner import OutputVector, evaluate_all

__all__ = ["SaReport", "regression_measures", "morris_measures",
           "fast_indices", "sobol_indices", "sobol_from_blocks",
           "importance_binned", "binned_report"]

_COLLINEARITY_TOL = 1e-10


@dataclass(frozen=True)
class SaReport:
    """Per-factor (or per-group) sensitivity table plus goodness fields."""

    method: str
    names: tuple
    measures: dict               # column name -> array aligned with names
    n: int
    n_excluded: int
    goodness: dict = field(default_factory=dict)
    notes: tuple = ()
    degenerate: bool = False

    def to_csv(self) -> str:
        cols = list(self.measures)
        buf = io.StringIO()
        meta = [f"method={self.method}", f"n={self.n}",
                f"n_excluded={self.n_excluded}"]
        meta += [f"{k}={_fmt(v)}" for k, v in self.goodness.items()]
        if self.degenerate:
            meta.append("degenerate=true")
        buf.write("# " + " ".join(meta) + "\n")
        buf.write(",".join(["factor"] + cols) + "\n")
        for i, name in enumerate(self.names):
            cells = [name]
            for c in cols:
                v = self.measures[c][i]
                cells.append("undefined" if not np.isfinite(v) else _fmt(v))
            buf.write(",".join(cells) + "\n")
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    if not np.isfinite(v):
        return "undefined"
    return f"{float(v):.12g}"


def _default_names(k: int) -> tuple:
    return tuple(f"x{j + 1}" for j in range(k))


def _as_vector(y) -> OutputVector:
    if isinstance(y, OutputVector):
        return y
    arr = np.asarray(y, dtype=float)
    faults = tuple(int(i) for i in np.flatnonzero(~np.isfinite(arr)))
    return OutputVector("y", arr, faults)


# ---------------------------------------------------------------------------
# regression and correlation measures

def _check_collinearity(xc: np.ndarray):
    """QR with column pivoting; complain about numerically dependent columns."""
    _, r, piv = linalg.qr(xc, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    if diag[0] == 0.0:
        raise CollinearityError(list(range(xc.shape[1])))
    bad = diag / diag[0] < _COLLINEARITY_TOL
    if bad.any():
        raise CollinearityError(sorted(int(piv[i]) for i in np.flatnonzero(bad)))


def _fit_family(x: np.ndarray, y: np.ndarray):
    """SRC-style coefficients, partial correlations, Pearson correlations
    and R^2 for one (possibly rank-transformed) data set."""
    n, k = x.shape
    xc = x - x.mean(axis=0)
    yc = y - y.mean()
    sx = x.std(axis=0, ddof=1)
    sy = y.std(ddof=1)
    if sy == 0.0 or np.any(sx == 0.0):
        flat = [j for j in range(k) if sx[j] == 0.0]
        raise CollinearityError(flat if flat else list(range(k)))
    _check_collinearity(xc)

    coef, *_ = np.linalg.lstsq(xc, yc, rcond=None)
    resid = yc - xc @ coef
    sst = float(yc @ yc)
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else 0.0
    src = coef * sx / sy
    pear = (xc / (sx * math.sqrt(n - 1))).T @ (yc / (sy * math.sqrt(n - 1)))

    pcc = np.empty(k)
    for j in range(k):
        others = np.delete(np.arange(k), j)
        z = xc[:, others]
        if z.shape[1]:
            beta_x, *_ = np.linalg.lstsq(z, xc[:, j], rcond=None)
            beta_y, *_ = np.linalg.lstsq(z, yc, rcond=None)
            u = xc[:, j] - z @ beta_x
            v = yc - z @ beta_y
        else:
            u, v = xc[:, j], yc
        du = math.sqrt(float(u @ u))
        dv = math.sqrt(float(v @ v))
        pcc[j] = float(u @ v) / (du * dv) if du > 0 and dv > 0 else np.nan
    return src, pcc, pear, r2


def regression_measures(x: np.ndarray, y, names=None) -> SaReport:
    """Regression and correlation screening measures.

    Raw-scale SRC/PCC/PEAR plus the rank-transformed SRRC/PRCC/SPEA, with
    R^2 of both fits; validity of the raw measures should be judged
    against R^2, of the rank measures against rank-R^2.
    """
    x = np.asarray(x, dtype=float)
    yv = _as_vector(y)
    mask = yv.valid_mask() & np.all(np.isfinite(x), axis=1)
    xg, yg = x[mask], yv.y[mask]
    n, k = xg.shape
    if n <= k + 1:
        raise ParameterError(f"need n > k+1 rows for regression, got n={n}, k={k}")
    names = tuple(names) if names is not None else _default_names(k)

    src, pcc, pear, r2 = _fit_family(xg, yg)
    xr = np.column_stack([rankdata(xg[:, j]) for j in range(k)])
    yr = rankdata(yg)
    srrc, prcc, spea, rank_r2 = _fit_family(xr, yr)

    return SaReport(
        method="regression",
        names=names,
        measures={"SRC": src, "PCC": pcc, "PEAR": pear,
                  "SRRC": srrc, "PRCC": prcc, "SPEA": spea},
        n=n,
        n_excluded=int(len(yv.y) - n),
        goodness={"r2": r2, "rank_r2": rank_r2},
    )


# ---------------------------------------------------------------------------
# elementary effects

def morris_measures(sample: SampleMatrix, y, names=None) -> SaReport:
    """Elementary-effect statistics mu, mu* and sigma per factor.

    Effects are finite differences in unit-hypercube coordinates along the
    one-at-a-time trajectory steps, signed by the step direction. A fault
    row invalidates only the one or two effects it touches; sigma needs at
    least two valid effects (NaN otherwise).
    """
    meta = sample.meta
    if not isinstance(meta, MorrisMeta):
        raise DesignMismatchError(
            f"elementary effects need a morris design, sample is '{meta.method}'")
    yv = _as_vector(y)
    r, k = meta.order.shape
    if len(yv.y) != r * (k + 1):
        raise ParameterError(
            f"output length {len(yv.y)} does not match {r} trajectories of {k + 1} rows")
    names = tuple(names) if names is not None else _default_names(k)

    effects = np.full((r, k), np.nan)
    excluded = 0
    valid = np.isfinite(yv.y)
    for t in range(r):
        base = t * (k + 1)
        for step in range(k):
            i0, i1 = base + step, base + step + 1
            f = meta.order[t, step]
            if not (valid[i0] and valid[i1]):
                excluded += 1
                continue
            effects[t, f] = (yv.y[i1] - yv.y[i0]) / (meta.delta * meta.signs[t, step])

    counts = np.sum(np.isfinite(effects), axis=0)
    with np.errstate(invalid="ignore"):
        mu = np.nanmean(effects, axis=0)
        mu_star = np.nanmean(np.abs(effects), axis=0)
        sigma = np.full(k, np.nan)
        for j in range(k):
            if counts[j] >= 2:
                sigma[j] = np.nanstd(effects[:, j], ddof=1)
    notes = tuple(f"factor '{names[j]}' has no valid elementary effects"
                  for j in range(k) if counts[j] == 0)
    return SaReport(
        method="morris",
        names=names,
        measures={"mu": mu, "mu_star": mu_star, "sigma": sigma},
        n=len(yv.y),
        n_excluded=excluded,
        goodness={"trajectories": r, "levels": meta.levels, "delta": meta.delta},
        notes=notes,
    )


# ---------------------------------------------------------------------------
# variance-based indices from Fourier-curve designs

def _block_spectrum(yb: np.ndarray):
    """(power at integer frequencies 1..(N-1)/2, total spectral variance)."""
    n = len(yb)
    amps = np.abs(np.fft.rfft(yb)) / n
    power = amps[1:] ** 2
    return power, 2.0 * power.sum()


def _degenerate(v: float, yb: np.ndarray) -> bool:
    scale = float(np.mean(np.abs(yb))) + 1.0
    return v <= 1e-12 * scale * scale


def fast_indices(sample: SampleMatrix, y, names=None) -> SaReport:
    """First-order (and, in extended mode, total) indices from the Fourier
    spectrum of the output along the design's search curves.

    Per block, the focal factor's variance share is read from the harmonics
    of its frequency up to the interference order; extended mode also reads
    the complement share from all frequencies up to half the focal
    frequency, giving the total index as its complement. Group designs are
    reported per group.
    """
    meta = sample.meta
    if not isinstance(meta, FastMeta):
        raise DesignMismatchError(
            f"fast indices need a fast design, sample is '{meta.method}'")
    yv = _as_vector(y)
    n = meta.n_per_block
    if len(yv.y) != meta.blocks * n:
        raise ParameterError(
            f"output length {len(yv.y)} does not match {meta.blocks} blocks of {n}")
    factor_names = tuple(names) if names is not None else _default_names(
        meta.frequencies.shape[1])
    group_names = tuple("+".join(factor_names[j] for j in g) for g in meta.groups)
    m = meta.interference
    valid = np.isfinite(yv.y)
    notes = []
    excluded = int((~valid).sum())

    if meta.mode == "extended":
        g = len(meta.groups)
        s = np.full(g, np.nan)
        st = np.full(g, np.nan)
        degenerate = False
        for b in range(g):
            rows = slice(b * n, (b + 1) * n)
            if not valid[rows].all():
                notes.append(f"block '{group_names[b]}' skipped: fault rows "
                             "break the spectral grid")
                continue
            yb = yv.y[rows]
            power, v = _block_spectrum(yb)
            if _degenerate(v, yb):
                degenerate = True
                notes.append(f"block '{group_names[b]}': zero output variance, "
                             "indices undefined")
                continue
            focal = meta.omega_max * np.arange(1, m + 1) - 1  # 0-based into power
            v_focal = 2.0 * power[focal].sum()
            cutoff = meta.omega_max // 2
            v_complement = 2.0 * power[:cutoff].sum()
            s[b] = v_focal / v
            st[b] = 1.0 - v_complement / v
        measures = {"S": s, "ST": st}
    else:
        rows = slice(0, n)
        g = len(meta.groups)
        s = np.full(g, np.nan)
        degenerate = False
        if not valid[rows].all():
            notes.append("classic block skipped: fault rows break the spectral grid")
        else:
            yb = yv.y[rows]
            power, v = _block_spectrum(yb)
            if _degenerate(v, yb):
                degenerate = True
                notes.append("zero output variance, indices undefined")
            else:
                for b, grp in enumerate(meta.groups):
                    w = int(meta.frequencies[0, grp[0]])
                    harm = w * np.arange(1, m + 1) - 1
                    s[b] = 2.0 * power[harm].sum() / v
        measures = {"S": s}

    goodness = {}
    if np.isfinite(s).any():
        goodness["sum_s"] = float(np.nansum(s))
        goodness["interaction_share"] = float(1.0 - np.nansum(s))
    return SaReport(
        method=meta.method,
        names=group_names,
        measures=measures,
        n=len(yv.y),
        n_excluded=excluded,
        goodness=goodness,
        notes=tuple(notes),
        degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# two-matrix variance-based indices

def sobol_from_blocks(meta: SobolMeta, y, names=None) -> SaReport:
    """Estimate (S_i, S_Ti) from an evaluated two-matrix design.

    First-order by the correlation-form estimator
    ``mean(f_B * (f_ABi - f_A)) / V`` and totals by Jansen's
    ``mean((f_A - f_ABi)^2) / (2 V)``. Fault rows are excluded
    pairwise-complete per factor.
    """
    if not isinstance(meta, SobolMeta):
        raise DesignMismatchError("two-matrix estimation needs a sobol design")
    yv = _as_vector(y)
    nb, k = meta.base_n, meta.k
    if len(yv.y) != nb * (k + 2):
        raise ParameterError(
            f"output length {len(yv.y)} does not match {k + 2} blocks of {nb}")
    names = tuple(names) if names is not None else _default_names(k)

    fa = yv.y[:nb]
    fb = yv.y[nb:2 * nb]
    ok_a, ok_b = np.isfinite(fa), np.isfinite(fb)
    base = np.concatenate([fa[ok_a], fb[ok_b]])
    excluded_union = ~(ok_a & ok_b)
    s = np.full(k, np.nan)
    st = np.full(k, np.nan)
    if len(base) < 2:
        return SaReport("sobol", names, {"S": s, "ST": st}, len(yv.y),
                        int((~np.isfinite(yv.y)).sum()),
                        notes=("too few valid base evaluations",), degenerate=True)
    v = float(np.var(base, ddof=1))
    degenerate = _degenerate(v, base)
    notes = []
    if degenerate:
        notes.append("zero output variance, indices undefined")
    else:
        for i in range(k):
            fab = yv.y[(2 + i) * nb:(3 + i) * nb]
            ok = ok_a & ok_b & np.isfinite(fab)
            excluded_union |= ~ok
            m = int(ok.sum())
            if m < 2:
                notes.append(f"factor '{names[i]}': too few valid rows")
                continue
            s[i] = float(np.mean(fb[ok] * (fab[ok] - fa[ok]))) / v
            st[i] = float(np.mean((fa[ok] - fab[ok]) ** 2)) / (2.0 * v)
    goodness = {}
    if np.isfinite(s).any():
        goodness["sum_s"] = float(np.nansum(s))
        goodness["interaction_share"] = float(1.0 - np.nansum(s))
        goodness["estimator"] = "correlation/jansen"
    return SaReport(
        method="sobol",
        names=names,
        measures={"S": s, "ST": st},
        n=len(yv.y),
        n_excluded=int(excluded_union.sum()),
        goodness=goodness,
        notes=tuple(notes),
        degenerate=degenerate,
    )


def sobol_indices(model, space: FactorSpace, n_base: int, seed: int,
                  output: str | None = None) -> SaReport:
    """Design, evaluate and estimate two-matrix indices in one call;
    costs n_base * (k + 2) model evaluations."""
    sample = sobol_design(len(space), n_base, seed).bind(space)
    vectors = evaluate_all(model, sample, space)
    if output is None:
        yv = vectors[0]
    else:
        match = [v for v in vectors if v.name == output]
        if not match:
            raise ParameterError(f"model has no output named '{output}'")
        yv = match[0]
    return sobol_from_blocks(sample.meta, yv, names=space.names)


# ---------------------------------------------------------------------------
# binned importance measure (valid under correlated inputs)

def importance_binned(x: np.ndarray, y, bins: int | None = None) -> float:
    """First-order index estimate from binned conditional means.

    Rows are split into equal-frequency bins of ``x``; the variance of the
    bin means of ``y`` over the total variance estimates V(E(Y|X))/V(Y).
    Works on any sample, including rank-correlated ones.
    """
    x = np.asarray(x, dtype=float)
    yv = _as_vector(y)
    mask = yv.valid_mask() & np.isfinite(x)
    xg, yg = x[mask], yv.y[mask]
    n = len(xg)
    if bins is None:
        bins = max(2, int(math.isqrt(n)))
    if bins < 2:
        raise ParameterError("need at least 2 bins")
    if n < 10 * bins:
        raise ParameterError(
            f"need at least 10 rows per bin: n={n}, bins={bins}")
    vy = float(np.var(yg))
    if vy == 0.0:
        return float("nan")
    order = np.argsort(xg, kind="stable")
    ybar = float(yg.mean())
    v_between = 0.0
    for chunk in np.array_split(order, bins):
        m = float(yg[chunk].mean())
        v_between += len(chunk) * (m - ybar) ** 2
    return (v_between / n) / vy


def binned_report(x: np.ndarray, y, bins: int | None = None,
                  names=None) -> SaReport:
    """Apply ``importance_binned`` to every column of a value matrix."""
    x = np.asarray(x, dtype=float)
    yv = _as_vector(y)
    k = x.shape[1]
    names = tuple(names) if names is not None else _default_names(k)
    s = np.array([importance_binned(x[:, j], yv, bins) for j in range(k)])
    n_valid = int(yv.valid_mask().sum())
    goodness = {"sum_s": float(np.nansum(s))} if np.isfinite(s).any() else {}
    return SaReport(
        method="binned",
        names=names,
        measures={"S": s},
        n=len(yv.y),
        n_excluded=len(yv.y) - n_valid,
        goodness=goodness,
        degenerate=bool(np.isnan(s).all()),
    )
