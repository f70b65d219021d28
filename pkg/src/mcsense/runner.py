"""Model evaluation over a sample, internal or through an external command.

External coupling protocol: the command is invoked as
``<command> <sample_file> <output_file>``; the sample file is the text
format written by the design module (factor values), the output file holds
one line per sample row with one decimal per output, an optional single
``#`` header line naming the outputs, and the token ``NaN`` marking a
per-row fault. Exit status 0 means success.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math
import os
import shlex
import subprocess
import tempfile

import numpy as np

from .design import SampleMatrix, write_sample_file
from .distributions import FactorSpace
from .errors import ConfigError, ExternalModelError, FileFormatError
from .models import Builtin, External, Formula, ModelDef, evaluate_columns

__all__ = ["OutputVector", "evaluate_all", "run_external",
           "read_output_file", "write_output_file"]


@dataclass(frozen=True)
class OutputVector:
    """One scalar output evaluated over all sample rows.

    ``y`` is aligned to the sample rows; fault rows hold NaN and are listed
    in ``fault_rows``. Estimators exclude them and report the count.
    """

    name: str
    y: np.ndarray
    fault_rows: tuple = ()

    @property
    def n(self) -> int:
        return len(self.y)

    @property
    def n_effective(self) -> int:
        return len(self.y) - len(self.fault_rows)

    def valid_mask(self) -> np.ndarray:
        mask = np.ones(len(self.y), dtype=bool)
        if self.fault_rows:
            mask[list(self.fault_rows)] = False
        return mask


def _faults_from(y: np.ndarray) -> tuple:
    return tuple(int(i) for i in np.flatnonzero(~np.isfinite(y)))


def _vector(name: str, y: np.ndarray) -> OutputVector:
    faults = _faults_from(y)
    y = y.astype(float, copy=True)
    if faults:
        y[list(faults)] = np.nan
    return OutputVector(name, y, faults)


def evaluate_all(model: ModelDef, sample: SampleMatrix, space: FactorSpace,
                 parallelism: int | None = None,
                 workdir=None) -> list[OutputVector]:
    """Evaluate a model at every sample row, in row order.

    Internal models (formula, builtin) are evaluated in-process and
    vectorized; ``parallelism`` > 1 splits the rows into that many chunks
    evaluated on a thread pool and reassembled by index, which never
    changes the result. External models follow the file protocol (one
    batch child process, or a bounded pool in per-row mode).
    """
    values = sample.values
    if values is None:
        if sample.unit is None:
            raise ConfigError("sample matrix has neither unit nor value data")
        sample = sample.bind(space)
        values = sample.values

    if isinstance(model, External):
        return _evaluate_external(model, values, workdir)

    if isinstance(model, (Formula, Builtin)):
        n = values.shape[0]
        if not parallelism or parallelism <= 1 or n < 2:
            cols = evaluate_columns(model, values, space)
        else:
            chunks = np.array_split(np.arange(n), min(parallelism, n))
            with ThreadPoolExecutor(max_workers=parallelism) as pool:
                parts = list(pool.map(
                    lambda idx: evaluate_columns(model, values[idx], space),
                    chunks))
            cols = {name: np.concatenate([p[name] for p in parts])
                    for name in parts[0]}
        return [_vector(name, y) for name, y in cols.items()]

    raise ConfigError(f"cannot evaluate model of type {type(model).__name__}")


def run_external(command: str, sample_path, output_path,
                 timeout: float | None = None) -> subprocess.CompletedProcess:
    """Invoke ``<command> <sample_file> <output_file>``.

    Nonzero exit, spawn failure or timeout raise ExternalModelError with
    the captured stderr attached.
    """
    argv = shlex.split(command) + [str(sample_path), str(output_path)]
    try:
        proc = subprocess.run(argv, capture_output=True, text=True, timeout=timeout)
    except FileNotFoundError as exc:
        raise ExternalModelError(f"cannot launch external model: {exc}") from None
    except subprocess.TimeoutExpired as exc:
        stderr = exc.stderr.decode() if isinstance(exc.stderr, bytes) else (exc.stderr or "")
        raise ExternalModelError(
            f"external model timed out after {timeout}s", stderr=stderr) from None
    if proc.returncode != 0:
        raise ExternalModelError("external model failed",
                                 exit_code=proc.returncode, stderr=proc.stderr)
    return proc


def _evaluate_external(model: External, values: np.ndarray,
                       workdir=None) -> list[OutputVector]:
    n = values.shape[0]
    m = len(model.outputs)
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        if model.mode == "batch":
            sample_path = os.path.join(tmp, "sample.txt")
            output_path = os.path.join(tmp, "output.txt")
            write_sample_file(sample_path, values)
            run_external(model.command, sample_path, output_path, model.timeout)
            return read_output_file(output_path, expected_n=n, expected_m=m,
                                    default_names=model.outputs)

        # per-row: one single-row exchange per sample point, bounded pool
        def one(i: int) -> np.ndarray:
            spath = os.path.join(tmp, f"row{i}.in")
            opath = os.path.join(tmp, f"row{i}.out")
            write_sample_file(spath, values[i:i + 1])
            run_external(model.command, spath, opath, model.timeout)
            vecs = read_output_file(opath, expected_n=1, expected_m=m,
                                    default_names=model.outputs)
            return np.array([v.y[0] for v in vecs])

        with ThreadPoolExecutor(max_workers=4) as pool:
            rows = list(pool.map(one, range(n)))
    data = np.vstack(rows)
    return [_vector(model.outputs[j], data[:, j]) for j in range(m)]


def write_output_file(path, vectors: list[OutputVector]):
    """Write output vectors in the model-output text format (with header)."""
    n = vectors[0].n
    with open(path, "w", newline="\n") as fh:
        fh.write("# " + " ".join(v.name for v in vectors) + "\n")
        for i in range(n):
            cells = []
            for v in vectors:
                cells.append("NaN" if not math.isfinite(v.y[i]) else f"{v.y[i]:.17g}")
            fh.write(" ".join(cells) + "\n")


def read_output_file(path, expected_n: int | None = None,
                     expected_m: int | None = None,
                     default_names=None) -> list[OutputVector]:
    """Parse a model output file into one OutputVector per column.

    Output names come from the optional leading ``#`` header, then from
    ``default_names``, then fall back to y1..ym. ``NaN`` tokens become
    fault rows. Row/column count mismatches raise FileFormatError naming
    both counts.
    """
    with open(path) as fh:
        lines = fh.readlines()
    names = None
    rows = []
    for lineno, raw in enumerate(lines, start=1):
        text = raw.strip()
        if not text:
            continue
        if text.startswith("#"):
            if names is None and not rows:
                names = text[1:].split()
            continue
        parts = text.split()
        try:
            rows.append([float(tok) for tok in parts])
        except ValueError:
            raise FileFormatError("output row contains a non-numeric token",
                                  str(path), lineno) from None
        if len(rows) > 1 and len(parts) != len(rows[0]):
            raise FileFormatError(
                f"expected {len(rows[0])} outputs per row, found {len(parts)}",
                str(path), lineno)
    if not rows:
        raise FileFormatError("output file holds no data rows", str(path))
    data = np.asarray(rows, dtype=float)
    n, m = data.shape
    if expected_n is not None and n != expected_n:
        raise FileFormatError(
            f"expected {expected_n} output rows, found {n}", str(path))
    if expected_m is not None and m != expected_m:
        raise FileFormatError(
            f"expected {expected_m} outputs per row, found {m}", str(path))
    if names is not None and len(names) != m:
        raise FileFormatError(
            f"header names {len(names)} outputs but rows hold {m}", str(path))
    if names is None:
        if default_names is not None and len(default_names) == m:
            names = list(default_names)
        else:
            names = ["y"] if m == 1 else [f"y{j + 1}" for j in range(m)]
    return [_vector(names[j], data[:, j]) for j in range(m)]
