"""Experiment driver: linear-ramp baselines, drop-time sweeps, minimal segment
counts, summary tables and their persistence as CSV or JSON."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .errors import DefectQOCError, ValidationError
from .grape import (
    OptimizationReport,
    OptimizerConfig,
    Targets,
    infidelity,
    optimize,
    prepare_targets,
)
from .problems import PRESET_SUMMARIES, available_presets, preset
from .propagation import Pulse, linear_ramp
from .symmetry import (
    attach_targets,
    block_decompose,
    conserved_single_site_paulis,
    with_classes,
)

log = logging.getLogger(__name__)

DEFAULT_EPSILON = 1e-7
DEFAULT_N_RAMP = 1000
FORMATS = ("csv", "json")


def t_grid(t_min: float, t_max: float, t_step: float) -> list[float]:
    """Inclusive grid; points are ``t_min + k * t_step`` rounded to 12 digits."""
    if not t_step > 0:
        raise ValidationError("t_step must be positive")
    if not 0 < t_min <= t_max:
        raise ValidationError(f"need 0 < t_min <= t_max, got {t_min}, {t_max}")
    count = int(math.floor((t_max - t_min) / t_step + 1e-9)) + 1
    return [round(t_min + k * t_step, 12) for k in range(count)]


def _check_grid(grid: Sequence[float]) -> list[float]:
    values = [float(t) for t in grid]
    if not values:
        raise ValidationError("time grid is empty")
    if any(not t > 0 for t in values):
        raise ValidationError("grid times must be positive")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ValidationError("grid times must be strictly ascending")
    return values


@dataclass
class BaselineResult:
    problem: str
    n_ramp: int
    points: list[tuple[float, float]]


def baseline_curve(problem, grid: Sequence[float], n_ramp: int = DEFAULT_N_RAMP,
                   targets: Targets | None = None) -> list[tuple[float, float]]:
    """Infidelity of the linear ramp ``f = t/T`` at each duration in ``grid``."""
    grid = _check_grid(grid)
    targets = targets or prepare_targets(problem)
    return [(t, infidelity(targets, linear_ramp(t, n_ramp))) for t in grid]


# --- sweeps -----------------------------------------------------------------

@dataclass
class SweepRecord:
    duration: float
    infidelity_linear: float
    infidelity_opt: float
    restarts: int
    best_pulse: Pulse | None = field(default=None, repr=False)


@dataclass
class SweepResult:
    problem: str
    grid: list[float]
    records: list[SweepRecord]
    epsilon: float
    n_segments: int
    config: OptimizerConfig
    n_ramp: int = DEFAULT_N_RAMP

    @property
    def drop_time(self) -> float | None:
        for rec in self.records:
            if rec.infidelity_opt <= self.epsilon:
                return rec.duration
        return None

    @property
    def drop_record(self) -> SweepRecord | None:
        t = self.drop_time
        return None if t is None else next(r for r in self.records if r.duration == t)


def sweep(problem, grid: Sequence[float], n_segments: int, config: OptimizerConfig | None = None,
          epsilon: float = DEFAULT_EPSILON, n_ramp: int = DEFAULT_N_RAMP,
          targets: Targets | None = None) -> SweepResult:
    """Best-of-restarts optimization at every grid duration.

    Restarts at a grid point stop early once one reaches ``epsilon / 10``.
    """
    grid = _check_grid(grid)
    config = config or OptimizerConfig()
    targets = targets or prepare_targets(problem)
    records = []
    for t in grid:
        lin = infidelity(targets, linear_ramp(t, n_ramp))
        rep = optimize(problem, t, n_segments, config, targets=targets, stop_at=epsilon / 10)
        log.info("%s T=%g: linear %.3e, optimized %.3e", problem.name, t, lin, rep.best_infidelity)
        records.append(SweepRecord(t, lin, rep.best_infidelity, rep.restarts_used, rep.best_pulse))
    return SweepResult(problem.name, grid, records, float(epsilon), int(n_segments), config, n_ramp)


@dataclass
class MinSegmentsResult:
    problem: str
    duration: float
    epsilon: float
    n_max: int
    per_n: list[tuple[int, float]]
    config: OptimizerConfig

    @property
    def n_segments(self) -> int | None:
        for n, value in self.per_n:
            if value <= self.epsilon:
                return n
        return None


def min_segments(problem, duration: float, n_max: int, config: OptimizerConfig | None = None,
                 epsilon: float = DEFAULT_EPSILON, targets: Targets | None = None
                 ) -> MinSegmentsResult:
    """Scan ``N = 1..n_max`` and stop at the first count reaching ``epsilon``."""
    if int(n_max) != n_max or n_max < 1:
        raise ValidationError("n_max must be a positive integer")
    config = config or OptimizerConfig()
    targets = targets or prepare_targets(problem)
    per_n = []
    for n in range(1, int(n_max) + 1):
        rep = optimize(problem, duration, n, config, targets=targets, stop_at=epsilon / 10)
        per_n.append((n, rep.best_infidelity))
        if rep.best_infidelity <= epsilon:
            break
    return MinSegmentsResult(problem.name, float(duration), float(epsilon), int(n_max), per_n, config)


# --- Table I ------------------------------------------------------------------

@dataclass(frozen=True)
class TableSettings:
    """Search ranges for one table row: drop-time grid, sweep segments, segment cap."""

    grid: tuple[float, ...]
    n_segments: int
    n_max: int


TABLE_SETTINGS = {
    "creation": TableSettings(tuple(t_grid(1.0, 1.3, 0.05)), 2, 4),
    "deformation1": TableSettings(tuple(t_grid(1.6, 2.2, 0.1)), 4, 8),
    "injection2": TableSettings(tuple(t_grid(1.0, 1.6, 0.1)), 15, 20),
    "detachment": TableSettings(tuple(t_grid(2.8, 3.2, 0.025)), 32, 32),
}

TABLE_COLUMNS = ("problem", "spins", "drop_time", "n_segments", "infidelity_linear",
                 "infidelity_opt", "error")


@dataclass
class TableRow:
    problem: str
    spins: int | None = None
    drop_time: float | None = None
    n_segments: int | None = None
    infidelity_linear: float | None = None
    infidelity_opt: float | None = None
    error: str | None = None


@dataclass
class TableReport:
    rows: list[TableRow]
    config: OptimizerConfig
    epsilon: float


def _table_row(name: str, config: OptimizerConfig, epsilon: float, n_ramp: int,
               settings: TableSettings | None) -> TableRow:
    problem = preset(name)
    row = TableRow(name, spins=problem.n_qubits)
    settings = settings or TABLE_SETTINGS.get(name)
    if settings is None:
        raise ValidationError(f"no table settings for problem {name!r}")
    targets = prepare_targets(problem)
    result = sweep(problem, settings.grid, settings.n_segments, config, epsilon, n_ramp, targets)
    row.drop_time = result.drop_time
    if row.drop_time is None:
        return row
    row.infidelity_linear = result.drop_record.infidelity_linear
    found = min_segments(problem, row.drop_time, settings.n_max, config, epsilon, targets)
    row.n_segments = found.n_segments
    if found.n_segments is not None:
        row.infidelity_opt = dict(found.per_n)[found.n_segments]
    return row


def table_report(problems: Sequence[str], config: OptimizerConfig | None = None,
                 epsilon: float = DEFAULT_EPSILON, n_ramp: int = DEFAULT_N_RAMP,
                 settings: dict[str, TableSettings] | None = None) -> TableReport:
    """Spins, drop time, minimal segments, linear and optimized infidelity per problem.

    A failing problem yields a row with ``error`` set; the others still run.
    """
    config = config or OptimizerConfig()
    settings = settings or {}
    rows = []
    for name in problems:
        try:
            rows.append(_table_row(name, config, epsilon, n_ramp, settings.get(name)))
        except DefectQOCError as exc:
            rows.append(TableRow(name, error=f"{type(exc).__name__}: {exc}"))
    return TableReport(rows, config, float(epsilon))


# --- block census -------------------------------------------------------------

@dataclass
class BlockReport:
    problem: str
    n_qubits: int
    conserved: list[tuple[int, str]]
    symmetry_sites: list[int]
    residual_sites: list[int]
    n_sectors: int
    blocks: list[dict]
    classes: list[list[int]]


def block_report(problem, t_adiabatic: float | None = None,
                 n_adiabatic: int | None = None) -> BlockReport:
    """Conserved single-site Paulis, distinct sector blocks and their equivalence classes."""
    t_ad = problem.target.t_adiabatic if t_adiabatic is None else t_adiabatic
    n_ad = problem.target.n_adiabatic if n_adiabatic is None else n_adiabatic
    if problem.objective == "ensemble_gate":
        ensemble = prepare_targets(problem, t_ad, n_ad).ensemble
    else:
        ensemble = with_classes(attach_targets(block_decompose(problem), t_ad, n_ad))
    blocks = [{
        "index": i,
        "sector": [b.sector[s] for s in ensemble.symmetry_sites],
        "multiplicity": b.multiplicity,
        "members": list(b.members),
        "drift": [[t.coefficient, t.label()] for t in b.drift.terms],
        "control": [[t.coefficient, t.label()] for t in b.control.terms],
    } for i, b in enumerate(ensemble.blocks)]
    return BlockReport(problem.name, problem.n_qubits,
                       conserved_single_site_paulis(problem.drift, problem.control),
                       list(ensemble.symmetry_sites), list(ensemble.residual_sites),
                       ensemble.n_sectors, blocks, [list(c) for c in ensemble.equivalence_classes])


@dataclass
class Catalog:
    entries: list[dict]


def catalog() -> Catalog:
    entries = []
    for name in available_presets():
        p = preset(name)
        entries.append({"name": name, "spins": p.n_qubits, "objective": p.objective,
                        "summary": PRESET_SUMMARIES[name]})
    return Catalog(entries)


# --- persistence ----------------------------------------------------------------

def _pulse_dict(pulse: Pulse | None):
    if pulse is None:
        return None
    return {"duration": pulse.duration, "amplitudes": pulse.amplitudes.tolist()}


def _config_dict(config: OptimizerConfig) -> dict:
    d = asdict(config)
    d["init_range"] = list(d["init_range"])
    return d


def _metadata(kind: str, config: OptimizerConfig | None = None, **extra) -> dict:
    meta = {"kind": kind, "artifact": "defectqoc", "version": __version__}
    if config is not None:
        meta["master_seed"] = config.master_seed
        meta["config"] = _config_dict(config)
    meta.update(extra)
    return meta


def to_document(results) -> tuple[dict, list[str], list[list]]:
    """Metadata, CSV header and CSV rows describing ``results``.

    ``results`` is one of the harness result types, an
    :class:`OptimizationReport` or a baseline list of ``(T, infidelity)`` pairs.
    """
    if isinstance(results, SweepResult):
        meta = _metadata("sweep", results.config, problem=results.problem, grid=results.grid,
                         epsilon=results.epsilon, n_segments=results.n_segments,
                         n_ramp=results.n_ramp, drop_time=results.drop_time)
        header = ["T", "infidelity_linear", "infidelity_opt", "restarts"]
        rows = [[r.duration, r.infidelity_linear, r.infidelity_opt, r.restarts]
                for r in results.records]
        meta["best_pulses"] = [_pulse_dict(r.best_pulse) for r in results.records]
        return meta, header, rows
    if isinstance(results, OptimizationReport):
        meta = _metadata("solve", results.config, problem=results.problem,
                         duration=results.duration, n_segments=results.n_segments,
                         best_infidelity=results.best_infidelity,
                         best_pulse=_pulse_dict(results.best_pulse))
        header = ["index", "seed", "infidelity", "iterations", "exit_reason", "max_abs_amplitude"]
        rows = [[r.index, r.seed, r.infidelity, r.iterations, r.exit_reason, r.max_abs_amplitude]
                for r in results.per_restart]
        return meta, header, rows
    if isinstance(results, MinSegmentsResult):
        meta = _metadata("min_segments", results.config, problem=results.problem,
                         duration=results.duration, epsilon=results.epsilon,
                         n_max=results.n_max, n_segments=results.n_segments)
        return meta, ["N", "infidelity_opt"], [list(p) for p in results.per_n]
    if isinstance(results, TableReport):
        meta = _metadata("table", results.config, epsilon=results.epsilon)
        rows = [[getattr(r, c) for c in TABLE_COLUMNS] for r in results.rows]
        return meta, list(TABLE_COLUMNS), rows
    if isinstance(results, BlockReport):
        meta = _metadata("blocks", problem=results.problem, n_qubits=results.n_qubits,
                         conserved=[list(c) for c in results.conserved],
                         symmetry_sites=results.symmetry_sites,
                         residual_sites=results.residual_sites, n_sectors=results.n_sectors,
                         n_blocks=len(results.blocks), n_classes=len(results.classes),
                         classes=results.classes, blocks=results.blocks)
        class_of = {b: k for k, c in enumerate(results.classes) for b in c}
        rows = [[b["index"], "".join("+" if x > 0 else "-" for x in b["sector"]),
                 b["multiplicity"], class_of.get(b["index"])] for b in results.blocks]
        return meta, ["block", "sector", "multiplicity", "class"], rows
    if isinstance(results, BaselineResult):
        meta = _metadata("baseline", problem=results.problem, n_ramp=results.n_ramp)
        return meta, ["T", "infidelity_linear"], [list(p) for p in results.points]
    if isinstance(results, Catalog):
        header = ["name", "spins", "objective", "summary"]
        return (_metadata("catalog"), header,
                [[e[c] for c in header] for e in results.entries])
    raise ValidationError(f"cannot emit objects of type {type(results).__name__}")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render(results, fmt: str) -> str:
    """Serialized text; floats use shortest round-trip form so output is byte-stable."""
    if fmt not in FORMATS:
        raise ValidationError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    meta, header, rows = to_document(results)
    if fmt == "json":
        doc = {"metadata": meta, "columns": header, "rows": rows}
        return json.dumps(doc, indent=2) + "\n"
    buf = io.StringIO()
    buf.write("# " + json.dumps(meta, separators=(",", ":")) + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def emit(results, path, fmt: str = "json") -> Path:
    text = render(results, fmt)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as exc:
        raise ValidationError(f"cannot write {path}: {exc}") from None
    return path


def _parse_cell(text: str):
    if text == "":
        return None
    for kind in (int, float):
        try:
            return kind(text)
        except ValueError:
            pass
    return text


def load(path) -> dict:
    """Read an emitted file back as ``{"metadata", "columns", "rows"}``."""
    path = Path(path)
    text = path.read_text()
    if text.startswith("{"):
        return json.loads(text)
    first, _, body = text.partition("\n")
    if not first.startswith("# "):
        raise ValidationError(f"{path} is not an emitted CSV file")
    reader = csv.reader(io.StringIO(body))
    header = next(reader)
    rows = [[_parse_cell(c) for c in row] for row in reader]
    return {"metadata": json.loads(first[2:]), "columns": header, "rows": rows}


def as_array(doc: dict, column: str) -> np.ndarray:
    idx = doc["columns"].index(column)
    return np.array([np.nan if r[idx] is None else r[idx] for r in doc["rows"]], dtype=float)
