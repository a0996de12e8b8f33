"""Piecewise-constant evolution under ``H(t) = H1 + f(t) H2``.

Each segment is exponentiated exactly through a Hermitian eigendecomposition,
so a pulse of any segment count is propagated without Trotter error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AdiabaticityError, ValidationError
from .pauli import OperatorSum, apply_operator, realize

HERMITIAN_TOL = 1e-10
ADIABATIC_ENERGY_TOL = 1e-5


@dataclass(frozen=True, eq=False)
class Pulse:
    """Uniformly segmented control ``f(t)``; ``amplitudes[k]`` holds on segment k."""

    duration: float
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=float).reshape(-1)
        if amps.size < 1:
            raise ValidationError("a pulse needs at least one segment")
        if not np.all(np.isfinite(amps)):
            raise ValidationError("pulse amplitudes must be finite")
        duration = float(self.duration)
        if not duration > 0 or not math.isfinite(duration):
            raise ValidationError(f"pulse duration must be positive, got {self.duration!r}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "duration", duration)

    @property
    def n_segments(self) -> int:
        return self.amplitudes.size

    @property
    def dt(self) -> float:
        return self.duration / self.n_segments

    def __eq__(self, other):
        if not isinstance(other, Pulse):
            return NotImplemented
        return self.duration == other.duration and np.array_equal(self.amplitudes, other.amplitudes)

    def __repr__(self):
        return f"Pulse(duration={self.duration!r}, amplitudes={self.amplitudes.tolist()!r})"

    def refined(self, factor: int) -> "Pulse":
        """Same control with every segment split into ``factor`` equal pieces."""
        return Pulse(self.duration, np.repeat(self.amplitudes, factor))

    def split(self, n_first: int) -> tuple["Pulse", "Pulse"]:
        """Cut after ``n_first`` segments."""
        if not 0 < n_first < self.n_segments:
            raise ValidationError("split point must leave both halves non-empty")
        dt = self.dt
        return (Pulse(dt * n_first, self.amplitudes[:n_first]),
                Pulse(dt * (self.n_segments - n_first), self.amplitudes[n_first:]))


@dataclass(frozen=True, eq=False)
class Propagator:
    matrix: np.ndarray
    pulse: Pulse | None = field(default=None, repr=False)

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.matrix
        return self.matrix.astype(dtype)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def unitarity_error(self) -> float:
        u = self.matrix
        return float(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[0])))


def linear_ramp(duration: float, n_segments: int) -> Pulse:
    """Linear ramp from 0 to 1 sampled at segment midpoints."""
    if int(n_segments) != n_segments or n_segments < 1:
        raise ValidationError("n_segments must be a positive integer")
    n = int(n_segments)
    return Pulse(duration, (np.arange(n) + 0.5) / n)


def as_matrix(op) -> np.ndarray:
    if isinstance(op, OperatorSum):
        return realize(op)
    if isinstance(op, Propagator):
        return op.matrix
    mat = np.asarray(op, dtype=complex)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {mat.shape}")
    return mat


def _check_hermitian(mat: np.ndarray, label: str):
    if not np.allclose(mat, mat.conj().T, atol=HERMITIAN_TOL, rtol=0):
        raise ValidationError(f"{label} is not Hermitian")


def segment_eigensystems(h1: np.ndarray, h2: np.ndarray, amplitudes) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues ``(..., N, d)`` and eigenvectors ``(..., N, d, d)`` of ``h1 + f_k h2``.

    ``h1`` and ``h2`` may carry leading batch axes (one per block).
    """
    f = np.asarray(amplitudes, dtype=float)
    ham = h1[..., None, :, :] + f[:, None, None] * h2[..., None, :, :]
    return np.linalg.eigh(ham)


def segment_unitaries(h1: np.ndarray, h2: np.ndarray, amplitudes, dt: float) -> np.ndarray:
    w, v = segment_eigensystems(h1, h2, amplitudes)
    return (v * np.exp(-1j * w * dt)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def ordered_product(unitaries: np.ndarray) -> np.ndarray:
    """Time-ordered product ``U_{N-1} ... U_0`` along axis -3, by pairwise reduction."""
    us = unitaries
    while us.shape[-3] > 1:
        n = us.shape[-3]
        paired = us[..., 1:n - n % 2:2, :, :] @ us[..., 0:n - n % 2:2, :, :]
        if n % 2:
            paired = np.concatenate([paired, us[..., n - 1:, :, :]], axis=-3)
        us = paired
    return us[..., 0, :, :]


def segment_unitary(h1, h2, amplitude: float, dt: float) -> Propagator:
    """Exact ``exp(-i (h1 + f h2) dt)`` for one constant segment."""
    a, b = as_matrix(h1), as_matrix(h2)
    if a.shape != b.shape:
        raise ValidationError(f"drift {a.shape} and control {b.shape} differ in shape")
    _check_hermitian(a, "drift")
    _check_hermitian(b, "control")
    if not dt > 0:
        raise ValidationError("segment width must be positive")
    return Propagator(segment_unitaries(a, b, [amplitude], dt)[0])


def propagate_matrices(h1: np.ndarray, h2: np.ndarray, pulse: Pulse) -> np.ndarray:
    return ordered_product(segment_unitaries(h1, h2, pulse.amplitudes, pulse.dt))


def propagate(problem, pulse: Pulse) -> Propagator:
    """Full-register propagator of ``problem`` under ``pulse``."""
    h1, h2 = realize(problem.drift), realize(problem.control)
    return Propagator(propagate_matrices(h1, h2, pulse), pulse)


def evolve_state_matrices(h1: np.ndarray, h2: np.ndarray, pulse: Pulse, psi: np.ndarray,
                          chunk: int = 2048) -> np.ndarray:
    """Dense segment-by-segment state evolution (eigendecompositions computed in chunks)."""
    psi = np.asarray(psi, dtype=complex)
    dt = pulse.dt
    amps = pulse.amplitudes
    for start in range(0, amps.size, chunk):
        w, v = segment_eigensystems(h1, h2, amps[start:start + chunk])
        phases = np.exp(-1j * w * dt)
        for k in range(w.shape[0]):
            psi = v[k] @ (phases[k] * (v[k].conj().T @ psi))
    return psi


def _expm_apply(op: OperatorSum, psi: np.ndarray, tau: float, norm_bound: float) -> np.ndarray:
    """``exp(-i op tau) psi`` by scaled Taylor series on matrix-free products."""
    steps = max(1, math.ceil(norm_bound * abs(tau) / 0.5))
    h = tau / steps
    for _ in range(steps):
        acc = psi.copy()
        term = psi
        for k in range(1, 60):
            term = (-1j * h / k) * apply_operator(op, term)
            acc += term
            if np.linalg.norm(term) <= 1e-17 * np.linalg.norm(acc):
                break
        psi = acc
    return psi


def apply_to_state(problem, pulse: Pulse, state) -> np.ndarray:
    """Evolve a state without forming any ``2^n x 2^n`` matrix."""
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (problem.dim,):
        raise ValidationError(f"state has shape {psi.shape}, expected ({problem.dim},)")
    for f in pulse.amplitudes:
        ham = (problem.drift + problem.control.scaled(f)).simplify()
        bound = sum(abs(t.coefficient) for t in ham.terms)
        psi = _expm_apply(ham, psi, pulse.dt, bound)
    return psi


def invariant_subspace(operators, vectors, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (columns) of the smallest subspace containing ``vectors``
    and closed under every matrix in ``operators``."""
    basis: list[np.ndarray] = []
    queue = [np.asarray(v, dtype=complex) for v in vectors]
    while queue:
        v = queue.pop()
        for _ in range(2):
            for q in basis:
                v = v - q * np.vdot(q, v)
        norm = np.linalg.norm(v)
        if norm > tol:
            q = v / norm
            basis.append(q)
            queue.extend(op @ q for op in operators)
    if not basis:
        raise ValidationError("invariant subspace of zero vectors is empty")
    return np.column_stack(basis)


@dataclass(frozen=True, eq=False)
class ReducedStateProblem:
    """State-transfer dynamics restricted to the subspace reachable from the initial state.

    ``basis`` maps reduced coordinates back to the full register; evolution
    inside the subspace is exact because it is invariant under both
    Hamiltonians.
    """

    basis: np.ndarray
    drift: np.ndarray
    control: np.ndarray
    initial: np.ndarray

    def lift(self, psi: np.ndarray) -> np.ndarray:
        return self.basis @ psi


def reduce_state_problem(problem) -> ReducedStateProblem:
    h1, h2 = realize(problem.drift), realize(problem.control)
    g1 = problem.initial_vector()
    q = invariant_subspace([h1, h2], [g1])
    qh = q.conj().T
    drift = qh @ h1 @ q
    control = qh @ h2 @ q
    return ReducedStateProblem(q, 0.5 * (drift + drift.conj().T),
                               0.5 * (control + control.conj().T), qh @ g1)


def adiabatic_target_state(problem, t_adiabatic: float | None = None,
                           n_adiabatic: int | None = None,
                           reduced: ReducedStateProblem | None = None,
                           check: bool = True) -> np.ndarray:
    """Linear-ramp image of the initial state; a ground state of ``H1 + H2`` if slow enough."""
    if problem.objective != "state_transfer":
        raise ValidationError(f"problem {problem.name!r} is not a state-transfer problem")
    t_ad = problem.target.t_adiabatic if t_adiabatic is None else t_adiabatic
    n_ad = problem.target.n_adiabatic if n_adiabatic is None else n_adiabatic
    red = reduce_state_problem(problem) if reduced is None else reduced
    psi = evolve_state_matrices(red.drift, red.control, linear_ramp(t_ad, n_ad), red.initial)
    if check:
        h_final = red.drift + red.control
        energy = float(np.real(np.vdot(psi, h_final @ psi)))
        e0 = float(np.linalg.eigvalsh(realize(problem.h_final))[0])
        residual = energy - e0
        if residual > ADIABATIC_ENERGY_TOL:
            raise AdiabaticityError(
                f"ramp of duration {t_ad} ends {residual:.3e} above the final ground energy",
                residual=residual)
    return red.lift(psi)


def adiabatic_target_unitary(h1_block, h2_block, t_adiabatic: float = 1000.0,
                             n_adiabatic: int = 10_000) -> Propagator:
    """Linear-ramp propagator of one (block) control problem."""
    a, b = as_matrix(h1_block), as_matrix(h2_block)
    _check_hermitian(a, "drift")
    _check_hermitian(b, "control")
    ramp = linear_ramp(t_adiabatic, n_adiabatic)
    chunk = max(1, 2 ** 22 // (a.shape[0] ** 2))
    out = np.eye(a.shape[0], dtype=complex)
    for start in range(0, ramp.n_segments, chunk):
        us = segment_unitaries(a, b, ramp.amplitudes[start:start + chunk], ramp.dt)
        out = ordered_product(us) @ out
    return Propagator(out, ramp)
