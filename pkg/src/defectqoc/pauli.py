"""Weighted Pauli strings and Hermitian Pauli sums.

A string on ``n`` qubits is stored as a pair of bit masks (X part, Z part)
plus a real coefficient; bit ``s - 1`` of a mask refers to site ``s``.
Sites are 1-based throughout. A Y factor sets both bits.

Dense realizations use the usual Kronecker order: site 1 is the leftmost
factor, i.e. the most significant bit of a computational-basis index.
"""

from __future__ import annotations

import numbers
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from .errors import SizeError, SymmetryViolationError, ValidationError

MAX_DENSE_QUBITS = 14
AXES = ("X", "Y", "Z")
PRUNE_TOL = 1e-14


def _real_coefficient(value) -> float:
    if isinstance(value, numbers.Complex) and not isinstance(value, numbers.Real):
        if value.imag != 0:
            raise ValidationError(f"coefficient {value!r} is not real")
        value = value.real
    if isinstance(value, np.ndarray) and np.iscomplexobj(value):
        raise ValidationError(f"coefficient {value!r} is not real")
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"coefficient {value!r} is not a real number") from exc
    if not np.isfinite(out):
        raise ValidationError(f"coefficient {value!r} is not finite")
    return out


def _popcount(mask: int) -> int:
    return bin(mask).count("1")


@dataclass(frozen=True)
class PauliTerm:
    """Real multiple of a tensor product of single-qubit Paulis.

    Build instances with :meth:`from_support` or :func:`pauli`; the raw
    constructor takes masks and is mostly for internal use.
    """

    n_qubits: int
    coefficient: float
    x_mask: int = 0
    z_mask: int = 0

    def __post_init__(self):
        if not isinstance(self.n_qubits, (int, np.integer)) or self.n_qubits < 1:
            raise ValidationError(f"n_qubits must be a positive integer, got {self.n_qubits!r}")
        object.__setattr__(self, "n_qubits", int(self.n_qubits))
        object.__setattr__(self, "coefficient", _real_coefficient(self.coefficient))
        full = (1 << self.n_qubits) - 1
        if (self.x_mask | self.z_mask) & ~full or self.x_mask < 0 or self.z_mask < 0:
            raise ValidationError("support exceeds n_qubits")

    @classmethod
    def from_support(cls, n_qubits: int, coefficient, support: Mapping[int, str]) -> "PauliTerm":
        x_mask = z_mask = 0
        for site, axis in support.items():
            if not isinstance(site, (int, np.integer)) or isinstance(site, bool):
                raise ValidationError(f"site index {site!r} is not an integer")
            if not 1 <= site <= n_qubits:
                raise ValidationError(f"site {site} outside [1, {n_qubits}]")
            axis = str(axis).upper()
            if axis not in AXES:
                raise ValidationError(f"unknown Pauli axis {axis!r} on site {site}")
            bit = 1 << (int(site) - 1)
            if axis in ("X", "Y"):
                x_mask |= bit
            if axis in ("Z", "Y"):
                z_mask |= bit
        return cls(n_qubits, coefficient, x_mask, z_mask)

    @property
    def support(self) -> dict[int, str]:
        out = {}
        for site in range(1, self.n_qubits + 1):
            bit = 1 << (site - 1)
            x, z = bool(self.x_mask & bit), bool(self.z_mask & bit)
            if x and z:
                out[site] = "Y"
            elif x:
                out[site] = "X"
            elif z:
                out[site] = "Z"
        return out

    @property
    def key(self) -> tuple[int, int]:
        """Operator identity ignoring the coefficient."""
        return (self.x_mask, self.z_mask)

    @property
    def weight(self) -> int:
        return _popcount(self.x_mask | self.z_mask)

    def scaled(self, factor) -> "PauliTerm":
        return PauliTerm(self.n_qubits, self.coefficient * _real_coefficient(factor),
                         self.x_mask, self.z_mask)

    def __neg__(self) -> "PauliTerm":
        return self.scaled(-1.0)

    def label(self) -> str:
        sup = self.support
        if not sup:
            return "I"
        return "".join(f"{axis}{site}" for site, axis in sup.items())

    def __str__(self) -> str:
        return f"{self.coefficient:+g}*{self.label()}"


def pauli(n_qubits: int, axis: str, sites: Iterable[int], coefficient=1.0) -> PauliTerm:
    """Single-axis string, e.g. ``pauli(9, "X", [1, 2, 3, 5])`` for X_{1,2,3,5}."""
    sites = list(sites)
    if len(set(sites)) != len(sites):
        raise ValidationError(f"repeated site in {sites}")
    return PauliTerm.from_support(n_qubits, coefficient, {s: axis for s in sites})


@dataclass(frozen=True)
class OperatorSum:
    """Real linear combination of Pauli strings on a common register."""

    n_qubits: int
    terms: tuple[PauliTerm, ...] = ()

    def __post_init__(self):
        if not isinstance(self.n_qubits, (int, np.integer)) or self.n_qubits < 1:
            raise ValidationError(f"n_qubits must be a positive integer, got {self.n_qubits!r}")
        terms = tuple(self.terms)
        for i, term in enumerate(terms):
            if not isinstance(term, PauliTerm):
                raise ValidationError(f"term {i} is not a PauliTerm")
            if term.n_qubits != self.n_qubits:
                raise ValidationError(
                    f"term {i} acts on {term.n_qubits} qubits, sum on {self.n_qubits}")
        object.__setattr__(self, "terms", terms)

    def __iter__(self) -> Iterator[PauliTerm]:
        return iter(self.terms)

    def __len__(self) -> int:
        return len(self.terms)

    def _check(self, other: "OperatorSum"):
        if not isinstance(other, OperatorSum):
            return NotImplemented
        if other.n_qubits != self.n_qubits:
            raise ValidationError(
                f"cannot combine sums on {self.n_qubits} and {other.n_qubits} qubits")

    def __add__(self, other: "OperatorSum") -> "OperatorSum":
        if self._check(other) is NotImplemented:
            return NotImplemented
        return OperatorSum(self.n_qubits, self.terms + other.terms).simplify()

    def __sub__(self, other: "OperatorSum") -> "OperatorSum":
        if self._check(other) is NotImplemented:
            return NotImplemented
        return OperatorSum(self.n_qubits, self.terms + tuple(-t for t in other.terms)).simplify()

    def __neg__(self) -> "OperatorSum":
        return self.scaled(-1.0)

    def scaled(self, factor) -> "OperatorSum":
        return OperatorSum(self.n_qubits, tuple(t.scaled(factor) for t in self.terms))

    def simplify(self, tol: float = PRUNE_TOL) -> "OperatorSum":
        """Combine like strings and drop coefficients with magnitude <= tol.

        First-appearance order of the surviving strings is preserved.
        """
        acc: dict[tuple[int, int], float] = {}
        for term in self.terms:
            acc[term.key] = acc.get(term.key, 0.0) + term.coefficient
        terms = tuple(PauliTerm(self.n_qubits, c, x, z)
                      for (x, z), c in acc.items() if abs(c) > tol)
        return OperatorSum(self.n_qubits, terms)

    def canonical_key(self, decimals: int = 12) -> tuple:
        """Hashable, order-independent identity of the simplified sum."""
        simp = self.simplify()
        return (self.n_qubits,
                tuple(sorted((x, z, round(t.coefficient, decimals))
                             for t in simp.terms for (x, z) in [t.key])))

    def equals(self, other: "OperatorSum", tol: float = 1e-12) -> bool:
        if not isinstance(other, OperatorSum) or other.n_qubits != self.n_qubits:
            return False
        diff = (self - other).simplify(tol)
        return len(diff) == 0

    def is_hermitian(self) -> bool:
        # coefficients are real by construction
        return True

    def matrix(self) -> np.ndarray:
        return realize(self)

    def apply(self, state: np.ndarray) -> np.ndarray:
        return apply_operator(self, state)

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        return " ".join(str(t) for t in self.terms)


def _check_dense(n_qubits: int):
    if n_qubits > MAX_DENSE_QUBITS:
        raise SizeError(
            f"dense realization limited to {MAX_DENSE_QUBITS} qubits, got {n_qubits}; "
            "use apply_operator for state-level work")


def _index_masks(term: PauliTerm) -> tuple[int, int]:
    # site s sits at bit (n - s) of a basis index
    n = term.n_qubits
    xi = zi = 0
    for site in range(1, n + 1):
        bit = 1 << (site - 1)
        pos = 1 << (n - site)
        if term.x_mask & bit:
            xi |= pos
        if term.z_mask & bit:
            zi |= pos
    return xi, zi


def _term_action(term: PauliTerm, indices: np.ndarray):
    """Return (source index, complex weight) so that (P psi)[c] = w[c] psi[src[c]]."""
    xi, zi = _index_masks(term)
    src = indices ^ xi
    sign = 1 - 2 * (np.bitwise_count(src & zi) & 1).astype(np.int64)
    n_y = _popcount(term.x_mask & term.z_mask)
    return src, term.coefficient * (1j ** n_y) * sign


def realize(obj: PauliTerm | OperatorSum) -> np.ndarray:
    """Dense complex matrix of a Pauli string or Pauli sum."""
    if isinstance(obj, PauliTerm):
        obj = OperatorSum(obj.n_qubits, (obj,))
    if not isinstance(obj, OperatorSum):
        raise ValidationError(f"cannot realize {type(obj).__name__}")
    _check_dense(obj.n_qubits)
    dim = 1 << obj.n_qubits
    idx = np.arange(dim, dtype=np.int64)
    out = np.zeros((dim, dim), dtype=complex)
    for term in obj.terms:
        src, w = _term_action(term, idx)
        out[idx, src] += w
    return out


def apply_operator(obj: PauliTerm | OperatorSum, state: np.ndarray) -> np.ndarray:
    """Matrix-free product of a Pauli sum with a state (or a stack of columns)."""
    if isinstance(obj, PauliTerm):
        obj = OperatorSum(obj.n_qubits, (obj,))
    state = np.asarray(state)
    dim = 1 << obj.n_qubits
    if state.shape[0] != dim:
        raise ValidationError(f"state has leading dimension {state.shape[0]}, expected {dim}")
    idx = np.arange(dim, dtype=np.int64)
    out = np.zeros(state.shape, dtype=complex)
    for term in obj.terms:
        src, w = _term_action(term, idx)
        if state.ndim == 1:
            out += w * state[src]
        else:
            out += w[:, None] * state[src]
    return out


def commutes(a: PauliTerm, b: PauliTerm) -> bool:
    """Symplectic commutation test for two strings on the same register."""
    if a.n_qubits != b.n_qubits:
        raise ValidationError(f"strings act on {a.n_qubits} and {b.n_qubits} qubits")
    return _popcount((a.x_mask & b.z_mask) ^ (a.z_mask & b.x_mask)) % 2 == 0


def residual_sites(n_qubits: int, assigned: Iterable[int]) -> tuple[int, ...]:
    """Unassigned sites in ascending order; position i becomes residual site i + 1."""
    assigned = set(assigned)
    return tuple(s for s in range(1, n_qubits + 1) if s not in assigned)


def substitute_sites(term: PauliTerm, assignments: Mapping[int, int]) -> PauliTerm:
    """Replace X factors on assigned sites by their eigenvalues.

    Returns a string on the residual register (see :func:`residual_sites`).
    Sites absent from the string's support are simply dropped from the
    register. An assignment on a site carrying Y or Z raises
    :class:`SymmetryViolationError`.
    """
    coeff = term.coefficient
    sup = term.support
    for site, value in assignments.items():
        if not 1 <= site <= term.n_qubits:
            raise ValidationError(f"site {site} outside [1, {term.n_qubits}]")
        if value not in (1, -1):
            raise ValidationError(f"eigenvalue on site {site} must be +1 or -1, got {value!r}")
        axis = sup.get(site)
        if axis is None:
            continue
        if axis != "X":
            raise SymmetryViolationError(
                f"site {site} carries {axis} in {term.label()}; only X can be substituted")
        coeff *= value
    residual = residual_sites(term.n_qubits, assignments)
    if not residual:
        raise ValidationError("substitution leaves no residual sites")
    renumber = {old: new for new, old in enumerate(residual, start=1)}
    new_support = {renumber[s]: ax for s, ax in sup.items() if s in renumber}
    return PauliTerm.from_support(len(residual), coeff, new_support)


def substitute_sum(op: OperatorSum, assignments: Mapping[int, int]) -> OperatorSum:
    reduced = [substitute_sites(t, assignments) for t in op.terms]
    n = len(residual_sites(op.n_qubits, assignments))
    return OperatorSum(n, tuple(reduced)).simplify()


def spectrum(op: OperatorSum | PauliTerm) -> np.ndarray:
    """Ascending eigenvalues of the realized (Hermitian) matrix."""
    return np.linalg.eigvalsh(realize(op))


def mutually_commuting(terms: Sequence[PauliTerm]) -> bool:
    return all(commutes(a, b) for i, a in enumerate(terms) for b in terms[i + 1:])
