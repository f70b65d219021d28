"""Model definitions: inline formulas, built-in demo models, external commands.

The built-ins are the standard analytic test models of the sensitivity
analysis literature, with closed-form first-order and total indices
available through :func:`builtin_reference_indices` for use as oracles:

* ``linear``       y = sum_i c_i x_i, independent inputs
* ``ishigami``     y = sin x1 + a sin^2 x2 + b x3^4 sin x1, x_i ~ U(-pi, pi)
* ``sobol_g``      y = prod_i (|4 x_i - 2| + a_i) / (1 + a_i), x_i ~ U(0, 1)
"""

from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from . import formula
from .distributions import Factor, FactorSpace, Uniform
from .errors import ConfigError, EvalFault, UnsupportedModelError

__all__ = [
    "ModelDef", "Formula", "Builtin", "External",
    "evaluate", "evaluate_columns", "builtin_reference_indices",
    "ishigami_space", "sobol_g_space", "model_from_config",
]


class ModelDef:
    """Base class of model definitions."""

    def output_names(self) -> list[str]:
        raise NotImplementedError


@dataclass(frozen=True)
class Formula(ModelDef):
    """One or more named output expressions over the factor names."""

    outputs: tuple  # tuple of (name, Expr)

    def output_names(self):
        return [name for name, _ in self.outputs]

    def check_bindings(self, space: FactorSpace):
        known = set(space.names)
        for name, expr in self.outputs:
            missing = expr.variables() - known
            if missing:
                raise ConfigError(
                    f"formula output '{name}' references unknown factor(s) "
                    f"{sorted(missing)}")


@dataclass(frozen=True)
class Builtin(ModelDef):
    kind: str                      # "linear" | "ishigami" | "sobol_g"
    coefficients: tuple = ()       # linear
    a: float = 7.0                 # ishigami
    b: float = 0.1                 # ishigami
    g_a: tuple = ()                # sobol_g

    def output_names(self):
        return ["y"]

    def check_k(self, k: int):
        if self.kind == "linear" and len(self.coefficients) != k:
            raise ConfigError(
                f"linear model has {len(self.coefficients)} coefficients "
                f"for {k} factors")
        if self.kind == "ishigami" and k != 3:
            raise ConfigError(f"ishigami model needs exactly 3 factors, got {k}")
        if self.kind == "sobol_g" and len(self.g_a) != k:
            raise ConfigError(
                f"sobol_g model has {len(self.g_a)} 'a' values for {k} factors")


@dataclass(frozen=True)
class External(ModelDef):
    """Executable coupled through the sample/output file protocol."""

    command: str
    mode: str = "batch"            # "batch" | "per-row"
    timeout: float | None = None
    outputs: tuple = ("y",)

    def output_names(self):
        return list(self.outputs)


def _builtin_columns(model: Builtin, cols: np.ndarray) -> np.ndarray:
    if model.kind == "linear":
        return cols @ np.asarray(model.coefficients, dtype=float)
    if model.kind == "ishigami":
        x1, x2, x3 = cols[:, 0], cols[:, 1], cols[:, 2]
        return np.sin(x1) + model.a * np.sin(x2) ** 2 + model.b * x3**4 * np.sin(x1)
    if model.kind == "sobol_g":
        a = np.asarray(model.g_a, dtype=float)
        return np.prod((np.abs(4.0 * cols - 2.0) + a) / (1.0 + a), axis=1)
    raise ConfigError(f"unknown builtin '{model.kind}'")


def evaluate(model: ModelDef, row, space: FactorSpace) -> list[float]:
    """Evaluate one sample row; returns one value per model output.

    Math faults raise :class:`EvalFault` naming the failing subexpression
    (callers attach the row index).
    """
    row = np.asarray(row, dtype=float)
    if row.shape != (len(space),):
        raise ConfigError(f"row has {row.size} entries for {len(space)} factors")
    if isinstance(model, Formula):
        env = dict(zip(space.names, row))
        return [expr.eval(env) for _, expr in model.outputs]
    if isinstance(model, Builtin):
        model.check_k(len(space))
        out = float(_builtin_columns(model, row[None, :])[0])
        if not math.isfinite(out):
            raise EvalFault("math fault: non-finite result", model.kind)
        return [out]
    raise ConfigError("external models are evaluated through the runner")


def evaluate_columns(model: ModelDef, values: np.ndarray,
                     space: FactorSpace) -> dict[str, np.ndarray]:
    """Vectorized evaluation of an internal model over an n x k value matrix.

    Returns one array per output; math faults appear as non-finite entries.
    """
    values = np.asarray(values, dtype=float)
    if isinstance(model, Formula):
        model.check_bindings(space)
        env = {name: values[:, j] for j, name in enumerate(space.names)}
        return {name: expr.eval_columns(env) for name, expr in model.outputs}
    if isinstance(model, Builtin):
        model.check_k(len(space))
        with np.errstate(all="ignore"):
            return {"y": _builtin_columns(model, values)}
    raise ConfigError("external models are evaluated through the runner")


def ishigami_space() -> FactorSpace:
    """Canonical Ishigami inputs: three U(-pi, pi) factors."""
    u = Uniform(-math.pi, math.pi)
    return FactorSpace(tuple(Factor(f"x{i}", u) for i in (1, 2, 3)))


def sobol_g_space(k: int) -> FactorSpace:
    """Canonical G-function inputs: k U(0, 1) factors."""
    u = Uniform(0.0, 1.0)
    return FactorSpace(tuple(Factor(f"x{i}", u) for i in range(1, k + 1)))


def _is_uniform(dist, lo, hi) -> bool:
    return (isinstance(dist, Uniform)
            and math.isclose(dist.lower, lo, abs_tol=1e-12)
            and math.isclose(dist.upper, hi, abs_tol=1e-12))


def builtin_reference_indices(model: Builtin, space: FactorSpace) -> dict:
    """Closed-form first-order and total indices for a built-in model.

    Returns ``{"names": [...], "s": array, "st": array, "variance": V}``.
    Only defined for ``linear`` with independent inputs, ``ishigami`` over
    U(-pi, pi)^3, and ``sobol_g`` over U(0, 1)^k; anything else raises
    UnsupportedModelError.
    """
    k = len(space)
    names = space.names
    if space.correlation_target is not None and not np.allclose(
            space.correlation_target, np.eye(k)):
        raise UnsupportedModelError("reference indices require independent inputs")

    if isinstance(model, Builtin) and model.kind == "linear":
        model.check_k(k)
        c = np.asarray(model.coefficients, dtype=float)
        v = np.array([f.dist.variance() for f in space.factors])
        parts = c**2 * v
        total = parts.sum()
        if total <= 0:
            raise UnsupportedModelError("linear model with zero output variance")
        s = parts / total
        return {"names": names, "s": s, "st": s.copy(), "variance": float(total)}

    if isinstance(model, Builtin) and model.kind == "ishigami":
        model.check_k(k)
        if not all(_is_uniform(f.dist, -math.pi, math.pi) for f in space.factors):
            raise UnsupportedModelError(
                "ishigami reference indices require U(-pi, pi) inputs")
        a, b = model.a, model.b
        pi = math.pi
        v1 = 0.5 + b * pi**4 / 5.0 + b**2 * pi**8 / 50.0
        v2 = a**2 / 8.0
        v13 = b**2 * pi**8 * 8.0 / 225.0
        total = v1 + v2 + v13
        s = np.array([v1, v2, 0.0]) / total
        st = np.array([v1 + v13, v2, v13]) / total
        return {"names": names, "s": s, "st": st, "variance": float(total)}

    if isinstance(model, Builtin) and model.kind == "sobol_g":
        model.check_k(k)
        if not all(_is_uniform(f.dist, 0.0, 1.0) for f in space.factors):
            raise UnsupportedModelError(
                "sobol_g reference indices require U(0, 1) inputs")
        a = np.asarray(model.g_a, dtype=float)
        vi = (1.0 / 3.0) / (1.0 + a) ** 2
        total = np.prod(1.0 + vi) - 1.0
        s = vi / total
        st = np.array([vi[i] * np.prod(1.0 + np.delete(vi, i)) for i in range(k)]) / total
        return {"names": names, "s": s, "st": st, "variance": float(total)}

    raise UnsupportedModelError(
        f"no reference indices for model {getattr(model, 'kind', type(model).__name__)!r}")


def model_from_config(doc: dict) -> ModelDef:
    """Build a ModelDef from the ``model`` section of a configuration."""
    section = doc.get("model")
    if not isinstance(section, dict) or len(section) != 1:
        raise ConfigError(
            "'model' must be an object with exactly one of the keys "
            "'builtin', 'formula' or 'external'")
    (kind, body), = section.items()
    if kind == "formula":
        if not isinstance(body, dict) or not body:
            raise ConfigError("'formula' must map output names to formula text")
        outputs = tuple((name, formula.parse(text)) for name, text in body.items())
        return Formula(outputs)
    if kind == "builtin":
        if not isinstance(body, dict) or "name" not in body:
            raise ConfigError("'builtin' must be an object with a 'name'")
        name = body["name"]
        if name == "linear":
            return Builtin("linear", coefficients=tuple(body.get("coefficients", ())))
        if name == "ishigami":
            return Builtin("ishigami", a=float(body.get("a", 7.0)),
                           b=float(body.get("b", 0.1)))
        if name == "sobol_g":
            return Builtin("sobol_g", g_a=tuple(body.get("a", ())))
        raise ConfigError(f"unknown builtin model '{name}'")
    if kind == "external":
        if not isinstance(body, dict) or "command" not in body:
            raise ConfigError("'external' must be an object with a 'command'")
        mode = body.get("mode", "batch")
        if mode not in ("batch", "per-row"):
            raise ConfigError(f"external mode must be 'batch' or 'per-row', got '{mode}'")
        timeout = body.get("timeout")
        outputs = tuple(doc.get("outputs", ["y"]))
        return External(body["command"], mode,
                        None if timeout is None else float(timeout), outputs)
    raise ConfigError(f"unknown model kind '{kind}'")
