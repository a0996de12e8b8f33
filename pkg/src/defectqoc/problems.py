"""Named stabilizer control problems, problem files and initial states.

Every preset is a pair of endpoint Hamiltonians ``H_i`` and ``H_f`` made of
stabilizer strings weighted by ``-delta/2``.  The control problem is
``H(t) = H1 + f(t) H2`` with ``H1 = H_i`` and ``H2 = H_f - H_i``.
"""

from __future__ import annotations

import json
import math
import numbers
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import DegenerateReferenceError, UnknownProblemError, ValidationError
from .pauli import (
    MAX_DENSE_QUBITS,
    OperatorSum,
    PauliTerm,
    apply_operator,
    mutually_commuting,
    pauli,
    spectrum,
)

OBJECTIVES = ("state_transfer", "gate", "ensemble_gate")
DEFAULT_T_ADIABATIC = 1000.0
DEFAULT_N_ADIABATIC = 10_000
ENERGY_TOL = 1e-10


@dataclass(frozen=True)
class AdiabaticTarget:
    """Linear-ramp reference evolution that defines the optimization target."""

    t_adiabatic: float = DEFAULT_T_ADIABATIC
    n_adiabatic: int = DEFAULT_N_ADIABATIC

    def __post_init__(self):
        if not self.t_adiabatic > 0:
            raise ValidationError("t_adiabatic must be positive")
        if int(self.n_adiabatic) != self.n_adiabatic or self.n_adiabatic < 1:
            raise ValidationError("n_adiabatic must be a positive integer")
        object.__setattr__(self, "t_adiabatic", float(self.t_adiabatic))
        object.__setattr__(self, "n_adiabatic", int(self.n_adiabatic))


@dataclass(frozen=True)
class InitialState:
    """Either a product-state reference (characters 0, 1, +, -) or explicit amplitudes.

    The reference is projected onto the ground space of ``H1`` by
    :func:`canonical_ground_state`; explicit amplitudes are used as given.
    """

    reference: str | None = None
    amplitudes: tuple[complex, ...] | None = None

    def __post_init__(self):
        if (self.reference is None) == (self.amplitudes is None):
            raise ValidationError("initial state needs exactly one of reference or amplitudes")
        if self.reference is not None:
            bad = set(self.reference) - set("01+-")
            if bad or not self.reference:
                raise ValidationError(f"reference {self.reference!r} must use only 0, 1, +, -")
        else:
            object.__setattr__(self, "amplitudes",
                               tuple(complex(a) for a in self.amplitudes))


@dataclass(frozen=True)
class ControlProblem:
    name: str
    n_qubits: int
    drift: OperatorSum
    control: OperatorSum
    delta: float = 1.0
    objective: str = "state_transfer"
    initial_state: InitialState | None = None
    target: AdiabaticTarget = field(default_factory=AdiabaticTarget)

    def __post_init__(self):
        if self.objective not in OBJECTIVES:
            raise ValidationError(f"objective must be one of {OBJECTIVES}, got {self.objective!r}")
        if not self.delta > 0:
            raise ValidationError("delta must be positive")
        for label, op in (("drift", self.drift), ("control", self.control)):
            if op.n_qubits != self.n_qubits:
                raise ValidationError(
                    f"{label} acts on {op.n_qubits} qubits, problem declares {self.n_qubits}")
        if self.objective == "state_transfer" and self.initial_state is None:
            object.__setattr__(self, "initial_state", InitialState(reference="0" * self.n_qubits))
        if self.initial_state is not None:
            ref = self.initial_state.reference
            if ref is not None and len(ref) != self.n_qubits:
                raise ValidationError(
                    f"reference has {len(ref)} characters, problem has {self.n_qubits} qubits")
            amps = self.initial_state.amplitudes
            if amps is not None and len(amps) != 1 << self.n_qubits:
                raise ValidationError(
                    f"initial amplitudes have length {len(amps)}, expected {1 << self.n_qubits}")

    @classmethod
    def from_endpoints(cls, name: str, h_initial: OperatorSum, h_final: OperatorSum,
                       **kwargs) -> "ControlProblem":
        drift, control = control_split(h_initial, h_final)
        return cls(name=name, n_qubits=h_initial.n_qubits, drift=drift, control=control, **kwargs)

    @property
    def h_initial(self) -> OperatorSum:
        return self.drift

    @property
    def h_final(self) -> OperatorSum:
        return self.drift + self.control

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits

    def initial_vector(self) -> np.ndarray:
        """Unit initial state for state-transfer problems."""
        if self.initial_state is None:
            raise ValidationError(f"problem {self.name!r} has no initial state")
        if self.initial_state.amplitudes is not None:
            psi = np.asarray(self.initial_state.amplitudes, dtype=complex)
            return _validate_explicit_state(self.drift, psi)
        return canonical_ground_state(self.drift, self.initial_state.reference)

    def equals(self, other: "ControlProblem") -> bool:
        """Term-level equality of the physics (name excluded)."""
        return (self.n_qubits == other.n_qubits
                and self.drift.equals(other.drift)
                and self.control.equals(other.control)
                and math.isclose(self.delta, other.delta)
                and self.objective == other.objective
                and self.initial_state == other.initial_state
                and self.target == other.target)


def control_split(h_initial: OperatorSum, h_final: OperatorSum) -> tuple[OperatorSum, OperatorSum]:
    """Drift ``H_i`` and control ``H_f - H_i`` with like terms combined."""
    if h_initial.n_qubits != h_final.n_qubits:
        raise ValidationError(
            f"endpoints act on {h_initial.n_qubits} and {h_final.n_qubits} qubits")
    return h_initial, h_final - h_initial


def product_state(reference: str) -> np.ndarray:
    single = {
        "0": np.array([1, 0], dtype=complex),
        "1": np.array([0, 1], dtype=complex),
        "+": np.array([1, 1], dtype=complex) / math.sqrt(2),
        "-": np.array([1, -1], dtype=complex) / math.sqrt(2),
    }
    psi = np.ones(1, dtype=complex)
    for ch in reference:
        try:
            psi = np.kron(psi, single[ch])
        except KeyError:
            raise ValidationError(f"bad reference character {ch!r}") from None
    return psi


def canonical_ground_state(h: OperatorSum, reference: str | None = None) -> np.ndarray:
    """Project a product reference onto the joint ground space of commuting stabilizers.

    Each term ``c P`` contributes the projector ``(1 - sign(c) P) / 2`` onto
    its energy-lowering eigenspace. The default reference is ``|0...0>``.
    """
    terms = h.simplify().terms
    if not mutually_commuting(terms):
        raise ValidationError("canonical ground state needs mutually commuting terms")
    if reference is None:
        reference = "0" * h.n_qubits
    if len(reference) != h.n_qubits:
        raise ValidationError(f"reference {reference!r} does not match {h.n_qubits} qubits")
    psi = product_state(reference)
    for term in terms:
        sign = -1.0 if term.coefficient > 0 else 1.0
        unit = PauliTerm(term.n_qubits, sign, term.x_mask, term.z_mask)
        psi = 0.5 * (psi + apply_operator(unit, psi))
    norm = np.linalg.norm(psi)
    if norm < 1e-12:
        raise DegenerateReferenceError(
            f"stabilizer projection annihilates reference {reference!r}; "
            "choose a different reference product state")
    return psi / norm


def _validate_explicit_state(h: OperatorSum, psi: np.ndarray) -> np.ndarray:
    norm = np.linalg.norm(psi)
    if abs(norm - 1) > 1e-8:
        raise ValidationError(f"explicit initial state has norm {norm:.12g}, expected 1")
    psi = psi / norm
    if h.n_qubits <= MAX_DENSE_QUBITS:
        energy = float(np.real(np.vdot(psi, apply_operator(h, psi))))
        e0 = float(spectrum(h)[0])
        if energy - e0 > ENERGY_TOL:
            raise ValidationError(
                f"explicit initial state has energy {energy:.12g}, ground energy is {e0:.12g}")
    return psi


def _stab(n: int, delta: float, *groups: tuple[str, Sequence[int]]) -> OperatorSum:
    return OperatorSum(n, tuple(pauli(n, axis, sites, -delta / 2) for axis, sites in groups))


def _creation(delta: float = 1.0) -> ControlProblem:
    h_i = _stab(9, delta, ("X", (1, 2, 3, 5)), ("X", (5, 7, 8, 9)),
                ("Z", (2, 4, 5, 7)), ("Z", (3, 5, 6, 8)))
    h_f = _stab(9, delta, ("X", (1, 2, 3)), ("X", (7, 8, 9)), ("X", (5,)))
    return ControlProblem.from_endpoints("creation", h_i, h_f, delta=delta,
                                         objective="state_transfer",
                                         initial_state=InitialState(reference="0" * 9))


def _deformation1(delta: float = 1.0) -> ControlProblem:
    h_i = _stab(7, delta, ("Z", (3, 5, 6, 7)), ("X", (2, 3, 5)), ("X", (1, 3, 4, 6)))
    h_f = _stab(7, delta, ("X", (3,)), ("X", (2, 5)), ("X", (1, 4, 6)))
    return ControlProblem.from_endpoints("deformation1", h_i, h_f, delta=delta,
                                         objective="state_transfer",
                                         initial_state=InitialState(reference="0" * 7))


def _detachment(delta: float = 1.0) -> ControlProblem:
    h_i = _stab(12, delta, ("X", (1, 3, 4, 6)), ("X", (2, 4, 5, 7)), ("X", (6, 8, 9, 11)),
                ("X", (7, 9, 10, 12)), ("X", (4, 9)), ("Z", (4, 6, 7, 9)))
    h_f = _stab(12, delta, ("X", (1, 3, 6)), ("X", (2, 5, 7)), ("X", (6, 8, 11)),
                ("X", (7, 10, 12)), ("X", (4,)), ("X", (9,)))
    return ControlProblem.from_endpoints("detachment", h_i, h_f, delta=delta,
                                         objective="ensemble_gate")


def _injection2(delta: float = 1.0) -> ControlProblem:
    h_i = _stab(9, delta, ("Z", (1, 2, 3)), ("Z", (7, 8, 9)))
    h_f = _stab(9, delta, ("X", (2, 4, 5, 7)), ("X", (3, 5, 6, 8)))
    # |0...0> projects into the X_{2,3,4,6,7,8} = -1 mixture that never reaches
    # the final ground space; the all-plus reference fixes that sector to +1.
    return ControlProblem.from_endpoints("injection2", h_i, h_f, delta=delta,
                                         objective="state_transfer",
                                         initial_state=InitialState(reference="+" * 9))


_PRESETS = {
    "creation": _creation,
    "deformation1": _deformation1,
    "detachment": _detachment,
    "injection2": _injection2,
}

PRESET_SUMMARIES = {
    "creation": "pair of smooth defects, 9 spins, state transfer",
    "deformation1": "defect growth scenario 1, 7 spins, state transfer",
    "detachment": "surface-code region detachment, 12 spins, ensemble gate",
    "injection2": "state injection second procedure, 9 spins, state transfer",
}


def available_presets() -> list[str]:
    return list(_PRESETS)


def preset(name: str) -> ControlProblem:
    try:
        return _PRESETS[name]()
    except KeyError:
        raise UnknownProblemError(
            f"unknown preset {name!r}; available: {', '.join(_PRESETS)}") from None


# --- problem files -------------------------------------------------------

_TOP_KEYS = {"name", "n_qubits", "delta", "objective", "h_initial", "h_final",
             "initial_state", "target"}
_REQUIRED = {"name", "n_qubits", "objective", "h_initial", "h_final"}


def _is_real_number(value) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _parse_term(raw, n: int, where: str) -> PauliTerm:
    if not isinstance(raw, Mapping):
        raise ValidationError(f"{where}: term must be an object")
    extra = set(raw) - {"coeff", "paulis"}
    if extra:
        raise ValidationError(f"{where}: unknown fields {sorted(extra)}")
    if "coeff" not in raw or "paulis" not in raw:
        raise ValidationError(f"{where}: term needs 'coeff' and 'paulis'")
    coeff = raw["coeff"]
    if isinstance(coeff, (list, tuple)) and len(coeff) == 2 and all(map(_is_real_number, coeff)):
        if coeff[1] != 0:
            raise ValidationError(f"{where}: complex coefficient {coeff} makes the term non-Hermitian")
        coeff = coeff[0]
    if isinstance(coeff, str):
        try:
            parsed = complex(coeff.replace(" ", ""))
        except ValueError:
            raise ValidationError(f"{where}: coefficient {coeff!r} is not a number") from None
        if parsed.imag != 0:
            raise ValidationError(f"{where}: complex coefficient {coeff!r} makes the term non-Hermitian")
        coeff = parsed.real
    if not _is_real_number(coeff):
        raise ValidationError(f"{where}: coefficient {coeff!r} is not a real number")
    paulis = raw["paulis"]
    if not isinstance(paulis, list):
        raise ValidationError(f"{where}: 'paulis' must be a list")
    support: dict[int, str] = {}
    for j, entry in enumerate(paulis):
        loc = f"{where}.paulis[{j}]"
        if not isinstance(entry, Mapping) or set(entry) != {"site", "axis"}:
            raise ValidationError(f"{loc}: expected exactly the fields 'site' and 'axis'")
        site, axis = entry["site"], entry["axis"]
        if not isinstance(site, int) or isinstance(site, bool):
            raise ValidationError(f"{loc}: site {site!r} is not an integer")
        if not 1 <= site <= n:
            raise ValidationError(f"{loc}: site {site} outside [1, {n}] (sites are 1-based)")
        if axis not in ("X", "Y", "Z"):
            raise ValidationError(f"{loc}: axis {axis!r} not in X, Y, Z")
        if site in support:
            raise ValidationError(f"{loc}: site {site} repeated")
        support[site] = axis
    return PauliTerm.from_support(n, float(coeff), support)


def _parse_amplitude(value, where: str) -> complex:
    if _is_real_number(value):
        return complex(value)
    if isinstance(value, list) and len(value) == 2 and all(map(_is_real_number, value)):
        return complex(value[0], value[1])
    raise ValidationError(f"{where}: amplitude {value!r} must be a number or [re, im]")


def problem_from_dict(data: Mapping) -> ControlProblem:
    if not isinstance(data, Mapping):
        raise ValidationError("problem file must contain a JSON object")
    extra = set(data) - _TOP_KEYS
    if extra:
        raise ValidationError(f"unknown fields {sorted(extra)}")
    missing = _REQUIRED - set(data)
    if missing:
        raise ValidationError(f"missing fields {sorted(missing)}")
    n = data["n_qubits"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise ValidationError(f"n_qubits must be a positive integer, got {n!r}")
    delta = data.get("delta", 1.0)
    if not _is_real_number(delta) or delta <= 0:
        raise ValidationError(f"delta must be a positive real, got {delta!r}")
    sums = {}
    for key in ("h_initial", "h_final"):
        raw = data[key]
        if not isinstance(raw, list):
            raise ValidationError(f"{key} must be a list of terms")
        sums[key] = OperatorSum(n, tuple(_parse_term(t, n, f"{key}[{i}]") for i, t in enumerate(raw)))

    initial = None
    if "initial_state" in data:
        raw = data["initial_state"]
        if not isinstance(raw, Mapping) or set(raw) != {"reference"}:
            raise ValidationError("initial_state must be an object with the single field 'reference'")
        ref = raw["reference"]
        if isinstance(ref, str):
            initial = InitialState(reference=ref)
        elif isinstance(ref, list):
            amps = tuple(_parse_amplitude(a, f"initial_state.reference[{i}]")
                         for i, a in enumerate(ref))
            initial = InitialState(amplitudes=amps)
        else:
            raise ValidationError("initial_state.reference must be a string or a list of amplitudes")

    target = AdiabaticTarget()
    if "target" in data:
        raw = data["target"]
        if not isinstance(raw, Mapping) or set(raw) - {"t_adiabatic", "n_adiabatic"}:
            raise ValidationError("target accepts only 't_adiabatic' and 'n_adiabatic'")
        t_ad = raw.get("t_adiabatic", DEFAULT_T_ADIABATIC)
        n_ad = raw.get("n_adiabatic", DEFAULT_N_ADIABATIC)
        if not _is_real_number(t_ad) or not isinstance(n_ad, int) or isinstance(n_ad, bool):
            raise ValidationError("target fields must be numeric (n_adiabatic an integer)")
        target = AdiabaticTarget(float(t_ad), n_ad)

    name = data["name"]
    if not isinstance(name, str) or not name:
        raise ValidationError("name must be a non-empty string")
    problem = ControlProblem.from_endpoints(
        name, sums["h_initial"], sums["h_final"], delta=float(delta),
        objective=data["objective"], initial_state=initial, target=target)
    if problem.objective == "state_transfer":
        problem.initial_vector()  # validates ground-state invariant
    return problem


def load_problem(path) -> ControlProblem:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read problem file {path}: {exc}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc})") from exc
    return problem_from_dict(data)


def _term_to_dict(term: PauliTerm) -> dict:
    return {"coeff": term.coefficient,
            "paulis": [{"site": s, "axis": a} for s, a in term.support.items()]}


def problem_to_dict(problem: ControlProblem) -> dict:
    out = {
        "name": problem.name,
        "n_qubits": problem.n_qubits,
        "delta": problem.delta,
        "objective": problem.objective,
        "h_initial": [_term_to_dict(t) for t in problem.h_initial.terms],
        "h_final": [_term_to_dict(t) for t in problem.h_final.terms],
        "target": {"t_adiabatic": problem.target.t_adiabatic,
                   "n_adiabatic": problem.target.n_adiabatic},
    }
    if problem.initial_state is not None:
        if problem.initial_state.reference is not None:
            ref = problem.initial_state.reference
        else:
            ref = [[a.real, a.imag] for a in problem.initial_state.amplitudes]
        out["initial_state"] = {"reference": ref}
    return out


def save_problem(problem: ControlProblem, path) -> None:
    Path(path).write_text(json.dumps(problem_to_dict(problem), indent=2) + "\n")
