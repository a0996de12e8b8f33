"""Conserved single-site X operators and the sector blocks they induce.

Sector labels use the X eigenbasis of the symmetry sites: eigenvalue +1 is
bit 0, -1 is bit 1, and the smallest symmetry site is the most significant
bit of the sector index.  The full register is mapped to sector form by a
Hadamard on every symmetry site followed by moving those sites to the front.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import SymmetryViolationError, ValidationError
from .fidelity import phase_sensitive_fidelity
from .pauli import OperatorSum, PauliTerm, commutes, realize, residual_sites, substitute_sum
from .propagation import Pulse, Propagator, adiabatic_target_unitary, propagate_matrices

FINGERPRINT_DECIMALS = 9


@dataclass(frozen=True, eq=False)
class SectorBlock:
    sector: dict[int, int]
    residual_sites: tuple[int, ...]
    drift: OperatorSum
    control: OperatorSum
    multiplicity: int
    members: tuple[int, ...] = ()
    target: Propagator | None = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return 1 << len(self.residual_sites)

    def with_target(self, target: Propagator) -> "SectorBlock":
        return replace(self, target=target)


@dataclass(frozen=True, eq=False)
class BlockEnsemble:
    n_qubits: int
    symmetry_sites: tuple[int, ...]
    residual_sites: tuple[int, ...]
    blocks: tuple[SectorBlock, ...]
    sector_to_block: tuple[int, ...]
    equivalence_classes: tuple[tuple[int, ...], ...] | None = None

    @property
    def n_sectors(self) -> int:
        return len(self.sector_to_block)

    @property
    def multiplicities(self) -> list[int]:
        return [b.multiplicity for b in self.blocks]

    @property
    def has_targets(self) -> bool:
        return all(b.target is not None for b in self.blocks)


def conserved_single_site_paulis(h1: OperatorSum, h2: OperatorSum) -> list[tuple[int, str]]:
    """Every single-site Pauli commuting with all terms of both Hamiltonians."""
    if h1.n_qubits != h2.n_qubits:
        raise ValidationError(f"Hamiltonians act on {h1.n_qubits} and {h2.n_qubits} qubits")
    n = h1.n_qubits
    terms = h1.simplify().terms + h2.simplify().terms
    found = []
    for site in range(1, n + 1):
        for axis in ("X", "Y", "Z"):
            single = PauliTerm.from_support(n, 1.0, {site: axis})
            if all(commutes(single, t) for t in terms):
                found.append((site, axis))
    return found


def sector_assignment(symmetry_sites: Sequence[int], index: int) -> dict[int, int]:
    m = len(symmetry_sites)
    return {site: -1 if (index >> (m - 1 - j)) & 1 else 1
            for j, site in enumerate(symmetry_sites)}


def block_decompose(problem, symmetry_sites: Sequence[int] | None = None) -> BlockEnsemble:
    """Split the problem into sector blocks and merge sectors with identical reduced terms.

    With ``symmetry_sites=None`` every conserved single-site X is used.
    """
    conserved_x = {s for s, axis in conserved_single_site_paulis(problem.drift, problem.control)
                   if axis == "X"}
    if symmetry_sites is None:
        symmetry_sites = sorted(conserved_x)
    sites = tuple(sorted(int(s) for s in symmetry_sites))
    if len(set(sites)) != len(sites):
        raise ValidationError(f"repeated symmetry site in {symmetry_sites}")
    unverified = [s for s in sites if s not in conserved_x]
    if unverified:
        raise SymmetryViolationError(f"X on sites {unverified} is not conserved by the problem")
    if not sites:
        raise ValidationError("no symmetry sites given")
    residual = residual_sites(problem.n_qubits, sites)

    index_of: dict[tuple, int] = {}
    reduced: list[tuple[OperatorSum, OperatorSum]] = []
    members: list[list[int]] = []
    sector_to_block = []
    for sector in range(1 << len(sites)):
        assignment = sector_assignment(sites, sector)
        hd = substitute_sum(problem.drift, assignment)
        hc = substitute_sum(problem.control, assignment)
        key = (hd.canonical_key(), hc.canonical_key())
        if key not in index_of:
            index_of[key] = len(reduced)
            reduced.append((hd, hc))
            members.append([])
        members[index_of[key]].append(sector)
        sector_to_block.append(index_of[key])

    blocks = tuple(
        SectorBlock(sector=sector_assignment(sites, mem[0]), residual_sites=residual,
                    drift=hd, control=hc, multiplicity=len(mem), members=tuple(mem))
        for (hd, hc), mem in zip(reduced, members))
    return BlockEnsemble(problem.n_qubits, sites, residual, blocks, tuple(sector_to_block))


def attach_targets(ensemble: BlockEnsemble, t_adiabatic: float = 1000.0,
                   n_adiabatic: int = 10_000) -> BlockEnsemble:
    """Adiabatic target per block; one shared ramp keeps inter-block phases consistent."""
    blocks = tuple(
        b.with_target(adiabatic_target_unitary(realize(b.drift), realize(b.control),
                                               t_adiabatic, n_adiabatic))
        for b in ensemble.blocks)
    return replace(ensemble, blocks=blocks)


def _fingerprint(block: SectorBlock, target) -> tuple:
    hd, hc = realize(block.drift), realize(block.control)
    parts = [tuple(np.round(np.linalg.eigvalsh(m), FINGERPRINT_DECIMALS) + 0.0)
             for m in (hd, hc, hd + hc)]
    if target is not None:
        ev = np.linalg.eigvals(np.asarray(target))
        parts.append(tuple(sorted(zip(np.round(ev.real, FINGERPRINT_DECIMALS) + 0.0,
                                      np.round(ev.imag, FINGERPRINT_DECIMALS) + 0.0))))
    return tuple(parts)


def equivalence_classes(ensemble: BlockEnsemble, targets: Sequence | None = None
                        ) -> tuple[tuple[int, ...], ...]:
    """Group blocks whose drift, control, final-Hamiltonian and target spectra coincide.

    Classes are listed by first member; the first member is the representative.
    """
    if targets is None:
        targets = [b.target for b in ensemble.blocks]
    if len(targets) != len(ensemble.blocks):
        raise ValidationError(f"{len(targets)} targets for {len(ensemble.blocks)} blocks")
    groups: dict[tuple, list[int]] = {}
    for i, (block, target) in enumerate(zip(ensemble.blocks, targets)):
        groups.setdefault(_fingerprint(block, target), []).append(i)
    return tuple(tuple(g) for g in groups.values())


def with_classes(ensemble: BlockEnsemble) -> BlockEnsemble:
    return replace(ensemble, equivalence_classes=equivalence_classes(ensemble))


# --- sector basis ----------------------------------------------------------

_HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)


def _order(ensemble: BlockEnsemble) -> list[int]:
    return [s - 1 for s in ensemble.symmetry_sites] + [s - 1 for s in ensemble.residual_sites]


def to_sector_basis(ensemble: BlockEnsemble, state: np.ndarray) -> np.ndarray:
    """Full state -> array of shape ``(n_sectors, block_dim)``."""
    n = ensemble.n_qubits
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (1 << n,):
        raise ValidationError(f"state has shape {psi.shape}, expected ({1 << n},)")
    t = psi.reshape((2,) * n)
    for s in ensemble.symmetry_sites:
        t = np.moveaxis(np.tensordot(_HADAMARD, t, axes=([1], [s - 1])), 0, s - 1)
    t = np.transpose(t, _order(ensemble))
    return t.reshape(1 << len(ensemble.symmetry_sites), -1)


def from_sector_basis(ensemble: BlockEnsemble, blocks: np.ndarray) -> np.ndarray:
    n = ensemble.n_qubits
    t = np.asarray(blocks, dtype=complex).reshape((2,) * n)
    t = np.transpose(t, np.argsort(_order(ensemble)))
    for s in ensemble.symmetry_sites:
        t = np.moveaxis(np.tensordot(_HADAMARD, t, axes=([1], [s - 1])), 0, s - 1)
    return t.reshape(-1)


def block_propagators(ensemble: BlockEnsemble, pulse: Pulse) -> list[np.ndarray]:
    return [propagate_matrices(realize(b.drift), realize(b.control), pulse)
            for b in ensemble.blocks]


def blockwise_evolve_state(ensemble: BlockEnsemble, pulse: Pulse, full_state) -> np.ndarray:
    """Evolve a full-register state sector by sector."""
    sectors = to_sector_basis(ensemble, full_state)
    props = block_propagators(ensemble, pulse)
    out = np.empty_like(sectors)
    for idx, b in enumerate(ensemble.sector_to_block):
        out[idx] = props[b] @ sectors[idx]
    return from_sector_basis(ensemble, out)


def block_infidelities(ensemble: BlockEnsemble, pulse: Pulse) -> list[float]:
    """``1 - |Tr(U_j^dag V_j)| / d`` for every distinct block."""
    if not ensemble.has_targets:
        raise ValidationError("ensemble has no block targets attached")
    return [1.0 - abs(phase_sensitive_fidelity(u, b.target.matrix))
            for u, b in zip(block_propagators(ensemble, pulse), ensemble.blocks)]


def assemble(ensemble: BlockEnsemble, block_matrices: Sequence[np.ndarray]) -> np.ndarray:
    """Direct sum over all sectors, in sector order (the sector basis)."""
    d = 1 << len(ensemble.residual_sites)
    out = np.zeros((ensemble.n_sectors * d,) * 2, dtype=complex)
    for idx, b in enumerate(ensemble.sector_to_block):
        out[idx * d:(idx + 1) * d, idx * d:(idx + 1) * d] = block_matrices[b]
    return out


def sector_unitary(ensemble: BlockEnsemble) -> np.ndarray:
    """Unitary ``W`` with ``W @ psi`` giving the flattened sector-basis state."""
    dim = 1 << ensemble.n_qubits
    eye = np.eye(dim, dtype=complex)
    return np.column_stack([to_sector_basis(ensemble, eye[:, j]).reshape(-1) for j in range(dim)])


def representative_blocks(ensemble: BlockEnsemble) -> list[int]:
    classes = ensemble.equivalence_classes or equivalence_classes(ensemble)
    return [c[0] for c in classes]


# --- invariant subspaces inside a block ------------------------------------

SPLIT_TOL = 1e-8
KEY_DECIMALS = 10


def irreducible_subspaces(operators: Sequence[np.ndarray], seed: int = 0) -> list[np.ndarray]:
    """Isometries onto joint invariant subspaces that cannot be split further.

    A generic Hermitian element of the commutant of ``operators`` has one
    eigenspace per irreducible summand; its eigenvectors give the split.
    """
    mats = [np.asarray(m, dtype=complex) for m in operators]
    d = mats[0].shape[0]
    eye = np.eye(d)
    gram = sum((lambda a: a.conj().T @ a)(np.kron(m, eye) - np.kron(eye, m.T)) for m in mats)
    w, vecs = np.linalg.eigh(gram)
    null = vecs[:, w < SPLIT_TOL * max(1.0, w[-1])]
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=null.shape[1]) + 1j * rng.normal(size=null.shape[1])
    c = (null @ coeffs).reshape(d, d)
    c = c + c.conj().T
    ev, q = np.linalg.eigh(c)
    scale = max(1.0, float(np.max(np.abs(ev))))
    cuts = [0] + [i for i in range(1, d) if ev[i] - ev[i - 1] > 1e-6 * scale] + [d]
    return [q[:, lo:hi] for lo, hi in zip(cuts[:-1], cuts[1:])]


def _pauli_vector(m: np.ndarray) -> tuple[complex, np.ndarray]:
    return (0.5 * (m[0, 0] + m[1, 1]),
            np.array([0.5 * (m[0, 1] + m[1, 0]), 0.5j * (m[0, 1] - m[1, 0]),
                      0.5 * (m[0, 0] - m[1, 1])]))


def _frame(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Rotation taking ``a`` to +z and ``c`` into the xz half-plane with x >= 0."""
    tol = 1e-9
    if np.linalg.norm(a) > tol:
        e3 = a / np.linalg.norm(a)
    elif np.linalg.norm(c) > tol:
        e3 = c / np.linalg.norm(c)
    else:
        return np.eye(3)
    perp = c - e3 * e3.dot(c)
    if np.linalg.norm(perp) > tol:
        e1 = perp / np.linalg.norm(perp)
    else:
        seed = np.eye(3)[int(np.argmin(np.abs(e3)))]
        e1 = seed - e3 * e3.dot(seed)
        e1 /= np.linalg.norm(e1)
    return np.vstack([e1, np.cross(e3, e1), e3])


def subsystem_key(drift: np.ndarray, control: np.ndarray, target: np.ndarray) -> tuple:
    """Hashable label shared by unitarily equivalent two-level subsystems.

    Equal keys imply the same ``Tr(V^dag U)`` for every pulse.  Larger
    subsystems are only merged when identical.
    """
    d = drift.shape[0]

    def r(x):
        x = np.asarray(x)
        return tuple(np.round(x.real, KEY_DECIMALS).ravel() + 0.0) + \
            tuple(np.round(x.imag, KEY_DECIMALS).ravel() + 0.0)

    if d != 2:
        return (d, r(drift), r(control), r(target))
    a0, a = _pauli_vector(drift)
    c0, c = _pauli_vector(control)
    v0, v = _pauli_vector(target)
    rot = _frame(a.real, c.real)
    return (2, r([a0, c0, v0]), r(rot @ a.real), r(rot @ c.real), r(rot @ v))
