"""Error metrics, convergence orders and the CSV/JSON files runs leave behind."""

import csv
import json
import math
import time
from dataclasses import asdict, dataclass
from typing import Iterable, List, Sequence

import numpy as np

from .errors import PreconditionViolation
from .problem import ProblemSpec


@dataclass
class ErrorReport:
    rmse: float
    linf: float
    rel_l2: float
    eval_resolution: int
    wall_seconds: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)


def evaluation_grid(spec: ProblemSpec, n: int) -> np.ndarray:
    axes = [np.linspace(spec.lo[a], spec.hi[a], n) for a in range(3)]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, 3)


def exact_solution(spec: ProblemSpec, x) -> np.ndarray:
    """Exact solution of the side each point lies on."""
    phi = spec.phi
    inside = phi(phi.clip(x)) <= 0
    return np.where(inside, spec.exact("minus", x), spec.exact("plus", x))


def error_norms(predicted, exact) -> tuple:
    """``(rmse, linf, rel_l2)`` of a prediction against reference values."""
    error = np.asarray(predicted, dtype=np.float64) - np.asarray(exact, dtype=np.float64)
    rmse = float(np.sqrt(np.mean(error ** 2)))
    linf = float(np.max(np.abs(error)))
    norm = float(np.linalg.norm(exact))
    rel_l2 = float(np.linalg.norm(error) / norm) if norm > 0 else math.inf
    return rmse, linf, rel_l2


def evaluate_errors(spec: ProblemSpec, pair, eval_resolution: int, chunk: int = 65536) -> ErrorReport:
    """
    Compare the piecewise network solution with the exact solution on an ``N^3`` grid.

    Each node is predicted by the network of its side of the interface.
    """
    if not spec.has_exact:
        raise PreconditionViolation(f"problem {spec.name!r} has no exact solution")
    start = time.perf_counter()
    x = evaluation_grid(spec, eval_resolution)
    phi = spec.phi
    predicted = np.empty(len(x))
    exact = np.empty(len(x))
    for begin in range(0, len(x), chunk):
        part = x[begin:begin + chunk]
        predicted[begin:begin + chunk] = pair.predict(part, phi(phi.clip(part)))
        exact[begin:begin + chunk] = exact_solution(spec, part)
    rmse, linf, rel_l2 = error_norms(predicted, exact)
    return ErrorReport(rmse, linf, rel_l2, eval_resolution, time.perf_counter() - start)


def convergence_order(err_coarse: float, err_fine: float) -> float:
    """
    Observed order ``log2(err_coarse / err_fine)`` under halving of the grid spacing.

    Raises
    ------
    PreconditionViolation
        If either error is not positive.
    """
    if not err_coarse > 0 or not err_fine > 0:
        raise PreconditionViolation(
            f"convergence order needs positive errors, got {err_coarse} and {err_fine}"
        )
    return math.log2(err_coarse / err_fine)


HISTORY_COLUMNS = ("epoch", "loss", "lr", "region", "wall_seconds")
CONVERGENCE_COLUMNS = ("resolution", "rmse", "rmse_order", "linf", "linf_order", "rel_l2", "rel_l2_order")


class HistoryWriter:
    """Metrics CSV written one epoch at a time, flushed after every row."""

    def __init__(self, path):
        self.path = path
        self._file = open(path, "w", newline="", encoding="utf-8")
        self._writer = csv.writer(self._file)
        self._writer.writerow(HISTORY_COLUMNS)
        self._file.flush()

    def write(self, row) -> None:
        self._writer.writerow([getattr(row, name) for name in HISTORY_COLUMNS])
        self._file.flush()

    def close(self) -> None:
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_history(path, rows: Iterable) -> None:
    with HistoryWriter(path) as writer:
        for row in rows:
            writer.write(row)


def read_history(path) -> List[dict]:
    with open(path, newline="", encoding="utf-8") as f:
        return list(csv.DictReader(f))


def convergence_table(resolutions: Sequence[int], reports: Sequence[ErrorReport]) -> List[dict]:
    """One row per resolution with orders relative to the previous row (blank for the first)."""
    table = []
    for i, (resolution, report) in enumerate(zip(resolutions, reports)):
        row = {"resolution": resolution}
        for name in ("rmse", "linf", "rel_l2"):
            value = getattr(report, name)
            row[name] = value
            if i == 0:
                row[f"{name}_order"] = ""
            else:
                row[f"{name}_order"] = convergence_order(getattr(reports[i - 1], name), value)
        table.append(row)
    return table


def write_convergence(path, table: Sequence[dict]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=CONVERGENCE_COLUMNS)
        writer.writeheader()
        writer.writerows(table)


def write_report(path, report: ErrorReport, **extra) -> None:
    payload = asdict(report)
    payload.update(extra)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")
