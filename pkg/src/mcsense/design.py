"""Sample designs on the unit hypercube and their bookkeeping.

Each design function returns a :class:`SampleMatrix` holding the n x k unit
matrix plus method-specific metadata (``meta``). Factor values are attached
by mapping the unit matrix through the factor quantiles (``map_to_values``
or ``SampleMatrix.bind``). All designs are pure functions of their
arguments and seed.

Sample files are plain text: a header line ``n k``, then one row per line
with space-separated decimals (17 significant digits when written here);
lines starting with ``#`` are ignored.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import _directions
from .distributions import FactorSpace
from .errors import FileFormatError, ParameterError

__all__ = [
    "SampleMatrix", "PlainMeta", "LptauMeta", "LhsMeta", "MorrisMeta",
    "FastMeta", "SobolMeta", "meta_to_json", "meta_from_json",
    "random_design", "lhs_design", "lptau_design", "morris_design",
    "fast_design", "sobol_design", "fixed_design", "map_to_values",
    "read_sample_file", "write_sample_file", "interference_free_frequencies",
]


# ---------------------------------------------------------------------------
# design metadata variants

@dataclass(frozen=True)
class PlainMeta:
    """Unstructured designs: independent random or fixed-from-file."""

    method: str  # "random" or "fixed"


@dataclass(frozen=True)
class LptauMeta:
    skip: int = 0
    method = "lptau"


@dataclass(frozen=True)
class LhsMeta:
    strata: int              # strata per column within one replicate block
    replicates: int
    labels: np.ndarray       # replicate label per row
    method = "lhs"


@dataclass(frozen=True)
class MorrisMeta:
    trajectories: int
    levels: int
    delta: float
    order: np.ndarray        # (r, k) factor index perturbed at each step
    signs: np.ndarray        # (r, k) step direction for the matching entry of `order`
    method = "morris"

    def rows_per_trajectory(self) -> int:
        return self.order.shape[1] + 1


@dataclass(frozen=True)
class FastMeta:
    mode: str                # "classic" or "extended"
    interference: int        # harmonic order M read per frequency
    n_per_block: int
    omega_max: int
    frequencies: np.ndarray  # (blocks, k) integer frequency per factor
    phases: np.ndarray       # (blocks, k) phase shift per factor
    groups: tuple            # tuple of tuples of factor indices, one per block in extended mode

    @property
    def method(self) -> str:
        return f"fast-{self.mode}"

    @property
    def blocks(self) -> int:
        return self.frequencies.shape[0]


@dataclass(frozen=True)
class SobolMeta:
    """Two-matrix design: blocks A, B, then A with column i replaced from B."""

    base_n: int
    k: int
    method = "sobol"


def meta_to_json(meta) -> dict:
    d = {"method": meta.method}
    if isinstance(meta, LptauMeta):
        d["skip"] = meta.skip
    elif isinstance(meta, LhsMeta):
        d.update(strata=meta.strata, replicates=meta.replicates,
                 labels=meta.labels.tolist())
    elif isinstance(meta, MorrisMeta):
        d.update(trajectories=meta.trajectories, levels=meta.levels,
                 delta=meta.delta, order=meta.order.tolist(),
                 signs=meta.signs.tolist())
    elif isinstance(meta, FastMeta):
        d.update(mode=meta.mode, interference=meta.interference,
                 n_per_block=meta.n_per_block, omega_max=meta.omega_max,
                 frequencies=meta.frequencies.tolist(),
                 phases=meta.phases.tolist(),
                 groups=[list(g) for g in meta.groups])
    elif isinstance(meta, SobolMeta):
        d.update(base_n=meta.base_n, k=meta.k)
    return d


def meta_from_json(d: dict):
    method = d.get("method")
    if method in ("random", "fixed"):
        return PlainMeta(method)
    if method == "lptau":
        return LptauMeta(int(d["skip"]))
    if method == "lhs":
        return LhsMeta(int(d["strata"]), int(d["replicates"]),
                       np.asarray(d["labels"], dtype=int))
    if method == "morris":
        return MorrisMeta(int(d["trajectories"]), int(d["levels"]),
                          float(d["delta"]),
                          np.asarray(d["order"], dtype=int),
                          np.asarray(d["signs"], dtype=int))
    if method in ("fast-classic", "fast-extended"):
        return FastMeta(d["mode"], int(d["interference"]), int(d["n_per_block"]),
                        int(d["omega_max"]),
                        np.asarray(d["frequencies"], dtype=int),
                        np.asarray(d["phases"], dtype=float),
                        tuple(tuple(g) for g in d["groups"]))
    if method == "sobol":
        return SobolMeta(int(d["base_n"]), int(d["k"]))
    raise ParameterError(f"unknown design method '{method}'")


@dataclass(frozen=True)
class SampleMatrix:
    """An n x k design plus its mapping to factor values.

    ``unit`` holds unit-hypercube coordinates; ``values`` the factor-space
    values (None until bound against a FactorSpace, or when the matrix was
    reloaded from a values file). At least one of the two is always set.
    """

    unit: np.ndarray | None
    values: np.ndarray | None
    meta: object
    seed: int | None = None

    @property
    def n(self) -> int:
        m = self.unit if self.unit is not None else self.values
        return m.shape[0]

    @property
    def k(self) -> int:
        m = self.unit if self.unit is not None else self.values
        return m.shape[1]

    def bind(self, space: FactorSpace) -> "SampleMatrix":
        """Return a copy with ``values`` mapped through the factor quantiles."""
        return SampleMatrix(self.unit, map_to_values(self.unit, space),
                            self.meta, self.seed)


def _check_size(k: int, n: int):
    if k < 1:
        raise ParameterError("factor count k must be >= 1")
    if n < 1:
        raise ParameterError("sample size n must be >= 1")


# ---------------------------------------------------------------------------
# designs

def random_design(k: int, n: int, seed: int) -> SampleMatrix:
    """Independent uniform sampling: n x k i.i.d. U[0,1) values."""
    _check_size(k, n)
    unit = np.random.default_rng(seed).random((n, k))
    return SampleMatrix(unit, None, PlainMeta("random"), seed)


def lhs_design(k: int, n: int, seed: int, replicates: int = 1) -> SampleMatrix:
    """Latin Hypercube design, optionally replicated.

    With ``replicates`` r > 1 the design consists of r independent LHS
    blocks of size n/r each; row labels in the metadata record the block.
    Within a block every column places exactly one point, uniformly
    located, in each of the n/r equal strata of [0, 1).
    """
    _check_size(k, n)
    if replicates < 1:
        raise ParameterError("replicates must be >= 1")
    if n % replicates != 0:
        raise ParameterError(
            f"replicates ({replicates}) must divide the sample size ({n})")
    rng = np.random.default_rng(seed)
    b = n // replicates
    unit = np.empty((n, k))
    for rep in range(replicates):
        block = slice(rep * b, (rep + 1) * b)
        for j in range(k):
            perm = rng.permutation(b)
            unit[block, j] = (perm + rng.random(b)) / b
    labels = np.repeat(np.arange(replicates), b)
    return SampleMatrix(unit, None, LhsMeta(b, replicates, labels), seed)


_NBITS = 30


def _direction_table(k: int) -> np.ndarray:
    """(k, _NBITS) direction numbers scaled by 2**_NBITS."""
    v = np.zeros((k, _NBITS), dtype=np.uint64)
    for dim in range(k):
        poly = _directions.POLY[dim]
        s = max(0, poly.bit_length() - 1)
        if s == 0:
            for j in range(_NBITS):
                v[dim, j] = 1 << (_NBITS - 1 - j)
            continue
        m = _directions.MINIT[dim]
        a = (poly - (1 << s) - 1) >> 1  # interior coefficient bits of the polynomial
        for j in range(_NBITS):
            if j < s:
                v[dim, j] = m[j] << (_NBITS - 1 - j)
            else:
                new = int(v[dim, j - s]) ^ (int(v[dim, j - s]) >> s)
                for t in range(1, s):
                    if (a >> (s - 1 - t)) & 1:
                        new ^= int(v[dim, j - t])
                v[dim, j] = new
    return v


def lptau_unit(k: int, n: int, skip: int = 0) -> np.ndarray:
    """Points skip+1 .. skip+n of the Sobol LP-tau sequence (Gray-code order).

    Raw sequence index 0 is the all-zeros point; it is never emitted, so
    ``skip=0`` starts at the first nonzero point (0.5, ..., 0.5).
    """
    if k > _directions.MAX_DIMENSION:
        raise ParameterError(
            f"LP-tau supports at most {_directions.MAX_DIMENSION} dimensions, got {k}")
    _check_size(k, n)
    if skip < 0:
        raise ParameterError("skip must be >= 0")
    v = _direction_table(k)
    idx = np.arange(skip + 1, skip + n + 1, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    x = np.zeros((n, k), dtype=np.uint64)
    for j in range(_NBITS):
        mask = (gray >> np.uint64(j)) & np.uint64(1) == 1
        if mask.any():
            x[mask] ^= v[:, j]
    return x / float(1 << _NBITS)


def lptau_design(k: int, n: int, skip: int = 0) -> SampleMatrix:
    """Quasi-random LP-tau (Sobol sequence) design."""
    return SampleMatrix(lptau_unit(k, n, skip), None, LptauMeta(skip), None)


def morris_design(k: int, trajectories: int, levels: int = 4,
                  seed: int | None = None) -> SampleMatrix:
    """One-at-a-time screening design of r trajectories.

    Each trajectory starts at a random point of the p-level grid and steps
    each factor exactly once by +/- delta, delta = p/(2(p-1)), in random
    order; r(k+1) rows in total. The metadata records the factor perturbed
    at each step and the step sign.
    """
    _check_size(k, trajectories)
    p = levels
    if p < 2 or p % 2 != 0:
        raise ParameterError(f"levels must be an even integer >= 2, got {p}")
    rng = np.random.default_rng(seed)
    delta = p / (2.0 * (p - 1))
    unit = np.empty((trajectories * (k + 1), k))
    order = np.empty((trajectories, k), dtype=int)
    signs = np.empty((trajectories, k), dtype=int)
    for t in range(trajectories):
        # base grid point restricted so that base + delta stays inside [0, 1]
        base = rng.integers(0, p // 2, size=k) / (p - 1)
        sgn = rng.choice([-1, 1], size=k)
        perm = rng.permutation(k)
        order[t] = perm
        signs[t] = sgn[perm]
        row = base + np.where(sgn < 0, delta, 0.0)
        pos = t * (k + 1)
        unit[pos] = row
        for step, j in enumerate(perm):
            row = row.copy()
            row[j] += delta * sgn[j]
            unit[pos + 1 + step] = row
    meta = MorrisMeta(trajectories, p, delta, order, signs)
    return SampleMatrix(unit, None, meta, seed)


def interference_free_frequencies(count: int, order: int) -> list[int]:
    """Smallest integer frequencies free of interferences up to ``order``.

    Greedy search guaranteeing that no nonzero integer combination of the
    selected frequencies with L1 coefficient weight <= 2*order vanishes, so
    harmonics p*w_i (p <= order) never alias any other combination of
    order <= ``order``. Grows exponentially in ``count``; intended for the
    classic curve with a handful of factors.
    """
    if count < 1:
        raise ParameterError("need at least one frequency")
    if count > 12:
        raise ParameterError(
            "classic interference-free sets above 12 factors are impractical; "
            "use the extended mode or groups")
    budget = 2 * order
    reach = {0: budget}  # achievable sum -> best remaining coefficient weight
    freqs: list[int] = []
    w = 0
    while len(freqs) < count:
        w += 1
        collision = False
        for mult in range(1, budget):
            rem = reach.get(mult * w, -1)
            if rem >= mult:
                collision = True
                break
        if collision:
            continue
        freqs.append(w)
        updated = dict(reach)
        for s, b in reach.items():
            for mult in range(1, b + 1):
                nb = b - mult
                for t in (s + mult * w, s - mult * w):
                    if updated.get(t, -1) < nb:
                        updated[t] = nb
        reach = updated
    return freqs


def _singleton_groups(k: int) -> tuple:
    return tuple((j,) for j in range(k))


def _normalize_groups(k: int, groups) -> tuple:
    if groups is None:
        return _singleton_groups(k)
    norm = tuple(tuple(int(j) for j in g) for g in groups)
    flat = [j for g in norm for j in g]
    if sorted(flat) != list(range(k)):
        raise ParameterError(
            "groups must partition the factor indices 0..k-1 exactly once each")
    return norm


def fast_design(k: int, n_per_factor: int, mode: str = "extended",
                interference: int = 4, groups=None,
                seed: int | None = None) -> SampleMatrix:
    """Fourier-curve design for variance-based indices.

    Every factor follows the space-filling search curve
    ``x(s) = 1/2 + arcsin(sin(w*s + phi))/pi`` over one period.

    extended mode: one block of ``n_per_factor`` points per factor (or per
    group); the focal factor carries the top frequency
    ``w_max = (n_per_factor - 1) // (2*interference)`` while the complement
    cycles over low frequencies <= w_max/(2*interference). Supports first
    and total indices.

    classic mode: a single block in which all factors (or groups) carry
    interference-free frequencies; first-order indices only.
    """
    _check_size(k, 1)
    m = interference
    if m < 1:
        raise ParameterError("interference order must be >= 1")
    n = n_per_factor
    if n < 3 or n % 2 == 0:
        raise ParameterError(f"n_per_factor must be odd and >= 3, got {n}")
    groups = _normalize_groups(k, groups)
    rng = np.random.default_rng(seed)
    s = 2.0 * np.pi * np.arange(n) / n

    if mode == "extended":
        omega_max = (n - 1) // (2 * m)
        if omega_max < m + 1:
            raise ParameterError(
                f"n_per_factor={n} is too small for interference order {m}: "
                f"needs at least {2 * m * (m + 1) + 1} points per block")
        comp_max = max(1, omega_max // (2 * m))
        blocks = len(groups)
        freqs = np.empty((blocks, k), dtype=int)
        for b, grp in enumerate(groups):
            comp = [j for j in range(k) if j not in grp]
            for j in grp:
                freqs[b, j] = omega_max
            for pos, j in enumerate(comp):
                freqs[b, j] = 1 + pos % comp_max
    elif mode == "classic":
        base = interference_free_frequencies(len(groups), m)
        omega_max = max(base)
        if n < 2 * m * omega_max + 1:
            raise ParameterError(
                f"classic curve with {len(groups)} factors/groups needs at least "
                f"{2 * m * omega_max + 1} points, got {n}")
        blocks = 1
        freqs = np.empty((1, k), dtype=int)
        for b, grp in enumerate(groups):
            for j in grp:
                freqs[0, j] = base[b]
    else:
        raise ParameterError(f"mode must be 'classic' or 'extended', got '{mode}'")

    phases = rng.random((blocks, k)) * 2.0 * np.pi
    unit = np.empty((blocks * n, k))
    for b in range(blocks):
        angles = np.outer(s, freqs[b]) + phases[b]
        unit[b * n:(b + 1) * n] = 0.5 + np.arcsin(np.sin(angles)) / np.pi
    meta = FastMeta(mode, m, n, int(omega_max), freqs, phases, groups)
    return SampleMatrix(unit, None, meta, seed)


def sobol_design(k: int, base_n: int, seed: int) -> SampleMatrix:
    """Two-matrix design for Sobol index estimation: base_n*(k+2) rows.

    Blocks, in row order: A, B, then for each factor i the matrix A with
    column i replaced by B's column i.
    """
    _check_size(k, base_n)
    rng = np.random.default_rng(seed)
    a = rng.random((base_n, k))
    b = rng.random((base_n, k))
    parts = [a, b]
    for i in range(k):
        abi = a.copy()
        abi[:, i] = b[:, i]
        parts.append(abi)
    return SampleMatrix(np.vstack(parts), None, SobolMeta(base_n, k), seed)


def fixed_design(path) -> SampleMatrix:
    """Load a unit matrix verbatim from a sample file (testing with known
    inputs); every entry must lie in [0, 1]."""
    unit = read_sample_file(path)
    bad = np.argwhere((unit < 0.0) | (unit > 1.0))
    if bad.size:
        r, c = bad[0]
        raise FileFormatError(
            f"entry {unit[r, c]!r} outside [0, 1] in data row {r + 1}, column {c + 1}",
            path=str(path))
    return SampleMatrix(unit, None, PlainMeta("fixed"), None)


def map_to_values(unit: np.ndarray, space: FactorSpace) -> np.ndarray:
    """Map unit-hypercube coordinates through the factor quantiles."""
    unit = np.asarray(unit, dtype=float)
    if unit.ndim != 2 or unit.shape[1] != len(space):
        raise ParameterError(
            f"unit matrix has {unit.shape[1] if unit.ndim == 2 else '?'} columns, "
            f"factor space has {len(space)}")
    values = np.empty_like(unit)
    for j, factor in enumerate(space.factors):
        values[:, j] = factor.dist.quantile(unit[:, j])
    return values


# ---------------------------------------------------------------------------
# sample file format

def write_sample_file(path, matrix: np.ndarray):
    """Write an n x k matrix in the text sample format (17 significant
    digits, LF endings) so that reading it back is bit-exact."""
    matrix = np.asarray(matrix, dtype=float)
    n, k = matrix.shape
    with open(path, "w", newline="\n") as fh:
        fh.write(f"{n} {k}\n")
        for row in matrix:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def read_sample_file(path) -> np.ndarray:
    """Parse a sample file; raises FileFormatError with the offending line."""
    with open(path) as fh:
        lines = fh.readlines()
    rows = []
    header = None
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        parts = text.split()
        if header is None:
            if len(parts) != 2:
                raise FileFormatError("header must be 'n k'", str(path), lineno)
            try:
                header = (int(parts[0]), int(parts[1]))
            except ValueError:
                raise FileFormatError("header must hold two integers",
                                      str(path), lineno) from None
            continue
        if len(parts) != header[1]:
            raise FileFormatError(
                f"expected {header[1]} values, found {len(parts)}", str(path), lineno)
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise FileFormatError("row contains a non-numeric token",
                                  str(path), lineno) from None
    if header is None:
        raise FileFormatError("file is empty", str(path))
    n, k = header
    if len(rows) != n:
        raise FileFormatError(
            f"header announces {n} rows but file holds {len(rows)}", str(path))
    out = np.asarray(rows, dtype=float)
    if not np.all(np.isfinite(out)):
        raise FileFormatError("sample entries must be finite", str(path))
    return out.reshape(n, k)
