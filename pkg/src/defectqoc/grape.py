"""GRAPE: exact gradients of piecewise-constant control objectives and
limited-memory BFGS descent from random starting pulses."""

from __future__ import annotations

import logging
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError, ValidationError
from .pauli import realize
from .propagation import (
    Propagator,
    Pulse,
    adiabatic_target_state,
    adiabatic_target_unitary,
    reduce_state_problem,
)
from .symmetry import (
    BlockEnsemble,
    block_decompose,
    irreducible_subspaces,
    subsystem_key,
    with_classes,
)

log = logging.getLogger(__name__)

EXIT_REASONS = ("gradient_converged", "infidelity_floor", "max_iterations",
                "line_search_stalled", "failed")


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 100
    master_seed: int = 0
    init_range: tuple[float, float] = (-1.0, 2.0)
    max_iterations: int = 10_000
    gradient_tolerance: float = 1e-12
    infidelity_floor: float = 1e-14
    memory_depth: int = 10
    armijo_slope: float = 1e-4
    backtrack_factor: float = 0.5
    max_backtracks: int = 60
    threads: int = 1

    def __post_init__(self):
        lo, hi = self.init_range
        object.__setattr__(self, "init_range", (float(lo), float(hi)))
        if not lo < hi:
            raise ValidationError(f"init_range {self.init_range} is empty")
        for name in ("restarts", "max_iterations", "memory_depth", "max_backtracks", "threads"):
            if int(getattr(self, name)) < 1:
                raise ValidationError(f"{name} must be a positive integer")
        for name in ("gradient_tolerance", "infidelity_floor"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if not 0 < self.backtrack_factor < 1 or not 0 < self.armijo_slope < 1:
            raise ValidationError("line-search constants must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class BlockStack:
    """Same-dimension subsystems evaluated together (leading axis = subsystem)."""

    drift: np.ndarray
    control: np.ndarray
    target: np.ndarray
    weights: np.ndarray
    initial: np.ndarray | None = None

    @property
    def n_blocks(self) -> int:
        return self.drift.shape[0]

    @property
    def dim(self) -> int:
        return self.drift.shape[-1]


@dataclass(frozen=True, eq=False)
class Targets:
    """Prepared objective data.

    ``kind == "state"``: a single stack holding the dynamics restricted to
    the subspace reachable from the initial state, with initial and target
    vectors in that subspace.

    ``kind == "gate"``: stacks of subsystems with target unitaries. The
    objective is ``1 - |sum_b w_b Tr(V_b^dag U_b)| / norm`` where ``norm`` is
    the weighted total dimension, i.e. one minus the ensemble fidelity over
    all sectors.
    """

    kind: str
    stacks: tuple[BlockStack, ...]
    norm: float
    ensemble: BlockEnsemble | None = field(default=None, repr=False)

    @property
    def n_blocks(self) -> int:
        return sum(s.n_blocks for s in self.stacks)


def _stack(drift, control, target, weights, initial=None) -> BlockStack:
    drift, control = np.asarray(drift), np.asarray(control)
    if np.iscomplexobj(drift) or np.iscomplexobj(control):
        if np.all(np.abs(drift.imag) < 1e-15) and np.all(np.abs(control.imag) < 1e-15):
            drift, control = drift.real.copy(), control.real.copy()
    return BlockStack(drift, control, np.asarray(target, dtype=complex),
                      np.asarray(weights, dtype=float),
                      None if initial is None else np.asarray(initial, dtype=complex))


SPLIT_MAX_DIM = 64


def _gate_stacks(pieces) -> tuple[BlockStack, ...]:
    """Group ``(drift, control, target, weight)`` pieces by dimension, merging equivalent ones."""
    merged: dict[tuple, list] = {}
    for hd, hc, v, w in pieces:
        key = subsystem_key(hd, hc, v)
        if key in merged:
            merged[key][3] += w
        else:
            merged[key] = [hd, hc, v, w]
    by_dim: dict[int, list] = {}
    for item in merged.values():
        by_dim.setdefault(item[0].shape[0], []).append(item)
    return tuple(
        _stack(np.stack([i[0] for i in items]), np.stack([i[1] for i in items]),
               np.stack([i[2] for i in items]), [i[3] for i in items])
        for _, items in sorted(by_dim.items()))


def prepare_targets(problem, t_adiabatic: float | None = None,
                    n_adiabatic: int | None = None, split: bool = True) -> Targets:
    """Build the adiabatic reference the optimizer aims at.

    For gate objectives each block is further split into the joint
    invariant subspaces of its drift and control (``split=True``); the
    objective value is unchanged, only cheaper to evaluate.
    """
    t_ad = problem.target.t_adiabatic if t_adiabatic is None else t_adiabatic
    n_ad = problem.target.n_adiabatic if n_adiabatic is None else n_adiabatic
    if problem.objective == "state_transfer":
        red = reduce_state_problem(problem)
        full_target = adiabatic_target_state(problem, t_ad, n_ad, reduced=red)
        target = red.basis.conj().T @ full_target
        stack = _stack(red.drift[None], red.control[None], target[None], [1.0],
                       initial=red.initial[None])
        return Targets("state", (stack,), 1.0)

    if problem.objective == "gate":
        blocks = [(realize(problem.drift), realize(problem.control), 1)]
        ensemble = None
    else:
        ensemble = block_decompose(problem)
        blocks = [(realize(b.drift), realize(b.control), b.multiplicity) for b in ensemble.blocks]

    pieces = []
    block_targets = []
    for hd, hc, mult in blocks:
        d = hd.shape[0]
        bases = irreducible_subspaces([hd, hc]) if split and d <= SPLIT_MAX_DIM else [np.eye(d)]
        v_block = np.zeros((d, d), dtype=complex)
        for q in bases:
            qh = q.conj().T
            sd, sc = qh @ hd @ q, qh @ hc @ q
            sd, sc = 0.5 * (sd + sd.conj().T), 0.5 * (sc + sc.conj().T)
            v = adiabatic_target_unitary(sd, sc, t_ad, n_ad).matrix
            v_block += q @ v @ qh
            pieces.append((sd, sc, v, float(mult)))
        block_targets.append(v_block)

    norm = float(sum(mult * hd.shape[0] for hd, _, mult in blocks))
    if ensemble is not None:
        ensemble = with_classes(replace(ensemble, blocks=tuple(
            b.with_target(Propagator(v)) for b, v in zip(ensemble.blocks, block_targets))))
    return Targets("gate", _gate_stacks(pieces), norm, ensemble=ensemble)


def state_targets(drift, control, initial, target) -> Targets:
    """Targets for steering ``initial`` to ``target`` under ``drift + f control``."""
    drift, control = np.asarray(drift, dtype=complex), np.asarray(control, dtype=complex)
    initial, target = np.asarray(initial, dtype=complex), np.asarray(target, dtype=complex)
    if not (drift.shape == control.shape == (initial.size,) * 2 and target.size == initial.size):
        raise ValidationError("drift, control and states disagree in dimension")
    return Targets("state", (_stack(drift[None], control[None], target[None], [1.0],
                                    initial=initial[None]),), 1.0)


def gate_targets(blocks) -> Targets:
    """Targets from ``(drift, control, target_unitary, weight)`` blocks; weights are integers."""
    pieces = []
    norm = 0.0
    for hd, hc, v, w in blocks:
        if int(w) != w or w <= 0:
            raise ValidationError(f"block weights must be positive integers, got {w!r}")
        hd = np.asarray(hd, dtype=complex)
        pieces.append((hd, np.asarray(hc, dtype=complex), np.asarray(v, dtype=complex), float(w)))
        norm += w * hd.shape[0]
    if not pieces:
        raise ValidationError("no blocks given")
    return Targets("gate", _gate_stacks(pieces), norm)


def _divided_differences(w: np.ndarray, dt: float) -> np.ndarray:
    """Kernel of the exponential's derivative: (e^{-i a dt} - e^{-i b dt}) / (a - b)."""
    mean = 0.5 * (w[..., :, None] + w[..., None, :])
    half = 0.5 * (w[..., :, None] - w[..., None, :]) * dt
    return -1j * dt * np.exp(-1j * mean * dt) * np.sinc(half / np.pi)


def _segments(stack: BlockStack, pulse: Pulse):
    f = pulse.amplitudes
    ham = stack.drift[:, None] + f[None, :, None, None] * stack.control[:, None]
    w, v = np.linalg.eigh(ham)
    phases = np.exp(-1j * w * pulse.dt)
    vh = np.swapaxes(v.conj(), -1, -2)
    us = (v * phases[..., None, :]) @ vh
    return w, v, vh, us


def _products(us: np.ndarray) -> np.ndarray:
    prod = us[:, 0]
    for k in range(1, us.shape[1]):
        prod = us[:, k] @ prod
    return prod


def infidelity(targets: Targets, pulse: Pulse) -> float:
    if targets.kind == "state":
        stack = targets.stacks[0]
        _, _, _, us = _segments(stack, pulse)
        psi = stack.initial
        for k in range(pulse.n_segments):
            psi = np.einsum("bij,bj->bi", us[:, k], psi)
        return float(1.0 - abs(np.vdot(stack.target[0], psi[0])) ** 2)
    total = 0j
    for stack in targets.stacks:
        _, _, _, us = _segments(stack, pulse)
        traces = np.einsum("bij,bij->b", stack.target.conj(), _products(us))
        total += np.sum(stack.weights * traces)
    return float(1.0 - abs(total) / targets.norm)


def _state_gradient(stack: BlockStack, pulse: Pulse):
    w, v, vh, us = _segments(stack, pulse)
    dmid = _divided_differences(w, pulse.dt) * (vh @ stack.control[:, None] @ v)
    n = pulse.n_segments
    fwd = [stack.initial]
    for k in range(n):
        fwd.append(np.einsum("bij,bj->bi", us[:, k], fwd[-1]))
    bwd = stack.target
    overlap = np.einsum("bi,bi->b", stack.target.conj(), fwd[-1])[0]
    grad = np.empty(n)
    for k in range(n - 1, -1, -1):
        a = np.einsum("bij,bj->bi", vh[:, k], bwd)
        b = np.einsum("bij,bj->bi", vh[:, k], fwd[k])
        d_overlap = np.einsum("bi,bij,bj->b", a.conj(), dmid[:, k], b)[0]
        grad[k] = -2.0 * np.real(np.conj(overlap) * d_overlap)
        bwd = np.einsum("bji,bj->bi", us[:, k].conj(), bwd)
    return float(1.0 - abs(overlap) ** 2), grad


def _trace_and_derivatives(stack: BlockStack, pulse: Pulse):
    """Weighted ``sum_b w_b Tr(V_b^dag U_b)`` and its derivative per segment."""
    w, v, vh, us = _segments(stack, pulse)
    dmid = _divided_differences(w, pulse.dt) * (vh @ stack.control[:, None] @ v)
    n = pulse.n_segments
    d = stack.dim
    fwd = [np.broadcast_to(np.eye(d, dtype=complex), (stack.n_blocks, d, d))]
    for k in range(n):
        fwd.append(us[:, k] @ fwd[-1])
    total = np.sum(stack.weights * np.einsum("bij,bij->b", stack.target.conj(), fwd[-1]))
    derivs = np.empty(n, dtype=complex)
    tail = np.swapaxes(stack.target.conj(), -1, -2)  # V^dag U_N ... U_{k+1}
    for k in range(n - 1, -1, -1):
        m = vh[:, k] @ fwd[k] @ tail @ v[:, k]
        derivs[k] = np.sum(stack.weights * np.einsum("bji,bij->b", m, dmid[:, k]))
        tail = tail @ us[:, k]
    return total, derivs


def infidelity_and_gradient(problem, pulse: Pulse, targets: Targets | None = None
                            ) -> tuple[float, np.ndarray]:
    """Objective and its exact derivative with respect to each segment amplitude."""
    if targets is None:
        raise ConfigurationError(
            f"no targets prepared for problem {getattr(problem, 'name', problem)!r}; "
            "call prepare_targets first")
    if targets.kind == "state":
        return _state_gradient(targets.stacks[0], pulse)
    total = 0j
    derivs = np.zeros(pulse.n_segments, dtype=complex)
    for stack in targets.stacks:
        t, dt = _trace_and_derivatives(stack, pulse)
        total += t
        derivs += dt
    mag = abs(total)
    if mag == 0.0:
        return 1.0, np.zeros(pulse.n_segments)
    grad = -np.real(np.conj(total) * derivs) / (mag * targets.norm)
    return float(1.0 - mag / targets.norm), grad


def random_initial_pulse(seed: int, n_segments: int, init_range=(-1.0, 2.0),
                         duration: float = 1.0) -> Pulse:
    """Amplitudes drawn i.i.d. uniform on ``init_range``."""
    rng = np.random.default_rng(seed)
    lo, hi = init_range
    return Pulse(duration, rng.uniform(lo, hi, size=int(n_segments)))


def restart_seed(master_seed: int, index: int) -> int:
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


# --- limited-memory BFGS ----------------------------------------------------

class _NonFiniteObjective(ArithmeticError):
    pass


def _two_loop(grad: np.ndarray, history) -> np.ndarray:
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(history):
        a = rho * s.dot(q)
        alphas.append(a)
        q -= a * y
    if history:
        s, y, _ = history[-1]
        q *= s.dot(y) / y.dot(y)
    for (s, y, rho), a in zip(history, reversed(alphas)):
        b = rho * y.dot(q)
        q += (a - b) * s
    return q


@dataclass
class DescentResult:
    x: np.ndarray
    value: float
    iterations: int
    evaluations: int
    exit_reason: str
    trace: list = field(default_factory=list)


def lbfgs(fun, x0, config: OptimizerConfig, record_trace: bool = False) -> DescentResult:
    """Minimize ``fun(x) -> (value, gradient)`` with two-loop L-BFGS and Armijo backtracking."""
    x = np.array(x0, dtype=float)
    f, g = fun(x)
    evals = 1
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise _NonFiniteObjective
    history: deque = deque(maxlen=config.memory_depth)
    trace = [f] if record_trace else []
    reason = "max_iterations"
    it = 0
    for it in range(config.max_iterations):
        if f <= config.infidelity_floor:
            reason = "infidelity_floor"
            break
        if np.max(np.abs(g)) <= config.gradient_tolerance:
            reason = "gradient_converged"
            break
        direction = -_two_loop(g, history)
        slope = g.dot(direction)
        if not slope < 0:
            history.clear()
            direction = -g
            slope = -g.dot(g)
        step = 1.0 if history else min(1.0, 1.0 / np.linalg.norm(g))
        accepted = False
        for _ in range(config.max_backtracks):
            x_new = x + step * direction
            f_new, g_new = fun(x_new)
            evals += 1
            if not np.isfinite(f_new) or not np.all(np.isfinite(g_new)):
                raise _NonFiniteObjective
            # strict decrease guards against accepting round-off ties
            if f_new <= f + config.armijo_slope * step * slope and f_new < f:
                accepted = True
                break
            step *= config.backtrack_factor
        if not accepted:
            reason = "line_search_stalled"
            break
        s, y = x_new - x, g_new - g
        sy = s.dot(y)
        if sy > 1e-300 and sy > 1e-12 * np.sqrt(s.dot(s) * y.dot(y)):
            history.append((s, y, 1.0 / sy))
        x, f, g = x_new, f_new, g_new
        if record_trace:
            trace.append(f)
    else:
        it = config.max_iterations
        if f <= config.infidelity_floor:
            reason = "infidelity_floor"
        elif np.max(np.abs(g)) <= config.gradient_tolerance:
            reason = "gradient_converged"
    return DescentResult(x, float(f), it, evals, reason, trace)


# --- multi-start driver -----------------------------------------------------

@dataclass(frozen=True)
class RestartRecord:
    index: int
    seed: int
    infidelity: float
    iterations: int
    exit_reason: str
    max_abs_amplitude: float


@dataclass(eq=False)
class OptimizationReport:
    problem: str
    duration: float
    n_segments: int
    best_pulse: Pulse | None
    best_infidelity: float
    per_restart: list[RestartRecord]
    config: OptimizerConfig
    wall_time: float = 0.0

    @property
    def n_failed(self) -> int:
        return sum(r.exit_reason == "failed" for r in self.per_restart)

    @property
    def restarts_used(self) -> int:
        return len(self.per_restart)


def _single_restart(problem, targets: Targets, duration: float, n_segments: int,
                    config: OptimizerConfig, index: int):
    seed = restart_seed(config.master_seed, index)
    x0 = random_initial_pulse(seed, n_segments, config.init_range).amplitudes

    def fun(x):
        return infidelity_and_gradient(problem, Pulse(duration, x), targets)

    try:
        with np.errstate(all="ignore"):
            res = lbfgs(fun, x0, config)
    except (_NonFiniteObjective, np.linalg.LinAlgError):
        return RestartRecord(index, seed, float("nan"), 0, "failed", float("nan")), None
    pulse = Pulse(duration, res.x)
    return (RestartRecord(index, seed, res.value, res.iterations, res.exit_reason,
                          float(np.max(np.abs(res.x)))), pulse)


def optimize(problem, duration: float, n_segments: int, config: OptimizerConfig | None = None,
             targets: Targets | None = None, stop_at: float | None = None) -> OptimizationReport:
    """Best-of-restarts GRAPE optimization at fixed duration and segment count.

    With ``stop_at`` set, restarts stop after the first one (in index order)
    whose infidelity is at or below it; the result does not depend on
    ``config.threads``.
    """
    config = config or OptimizerConfig()
    if int(n_segments) != n_segments or n_segments < 1:
        raise ValidationError("n_segments must be a positive integer")
    if not duration > 0:
        raise ValidationError("duration must be positive")
    if targets is None:
        targets = prepare_targets(problem)
    start = time.perf_counter()
    records: list[RestartRecord] = []
    pulses: list[Pulse | None] = []
    threads = max(1, int(config.threads))
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        index = 0
        done = False
        while index < config.restarts and not done:
            batch = range(index, min(config.restarts, index + threads))
            if pool is None:
                results = [_single_restart(problem, targets, duration, n_segments, config, i)
                           for i in batch]
            else:
                results = list(pool.map(
                    lambda i: _single_restart(problem, targets, duration, n_segments, config, i),
                    batch))
            for rec, pulse in results:
                records.append(rec)
                pulses.append(pulse)
                if stop_at is not None and rec.exit_reason != "failed" and rec.infidelity <= stop_at:
                    done = True
                    break
            index = batch.stop
    finally:
        if pool is not None:
            pool.shutdown()

    ok = [i for i, r in enumerate(records) if r.exit_reason != "failed"]
    if ok:
        best = min(ok, key=lambda i: records[i].infidelity)
        best_pulse, best_value = pulses[best], records[best].infidelity
    else:
        best_pulse, best_value = None, float("inf")
    log.debug("%s T=%g N=%d: best %.3e over %d restarts", problem.name, duration,
              n_segments, best_value, len(records))
    return OptimizationReport(problem.name, float(duration), int(n_segments), best_pulse,
                              best_value, records, config, time.perf_counter() - start)
