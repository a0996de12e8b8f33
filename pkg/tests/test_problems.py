import json
import itertools

import numpy as np
import pytest

from defectqoc.errors import (
    DegenerateReferenceError,
    UnknownProblemError,
    ValidationError,
)
from defectqoc.pauli import OperatorSum, apply_operator, pauli, realize
from defectqoc.problems import (
    ControlProblem,
    InitialState,
    available_presets,
    canonical_ground_state,
    control_split,
    load_problem,
    preset,
    problem_from_dict,
    problem_to_dict,
    save_problem,
)

# Endpoint term lists written out independently of the presets: (axis, sites).
ENDPOINTS = {
    "creation": (9,
                 [("X", (1, 2, 3, 5)), ("X", (5, 7, 8, 9)), ("Z", (2, 4, 5, 7)), ("Z", (3, 5, 6, 8))],
                 [("X", (1, 2, 3)), ("X", (7, 8, 9)), ("X", (5,))]),
    "deformation1": (7,
                     [("Z", (3, 5, 6, 7)), ("X", (2, 3, 5)), ("X", (1, 3, 4, 6))],
                     [("X", (3,)), ("X", (2, 5)), ("X", (1, 4, 6))]),
    "detachment": (12,
                   [("X", (1, 3, 4, 6)), ("X", (2, 4, 5, 7)), ("X", (6, 8, 9, 11)),
                    ("X", (7, 9, 10, 12)), ("X", (4, 9)), ("Z", (4, 6, 7, 9))],
                   [("X", (1, 3, 6)), ("X", (2, 5, 7)), ("X", (6, 8, 11)), ("X", (7, 10, 12)),
                    ("X", (4,)), ("X", (9,))]),
    "injection2": (9,
                   [("Z", (1, 2, 3)), ("Z", (7, 8, 9))],
                   [("X", (2, 4, 5, 7)), ("X", (3, 5, 6, 8))]),
}


def stabilizer_sum(n, groups):
    return OperatorSum(n, tuple(pauli(n, a, s, -0.5) for a, s in groups))


def small_problem(**kw):
    h_i = OperatorSum(2, (pauli(2, "Z", [1], -0.5), pauli(2, "Z", [2], -0.5)))
    h_f = OperatorSum(2, (pauli(2, "X", [1], -0.5), pauli(2, "X", [2], -0.5)))
    return ControlProblem.from_endpoints("pair", h_i, h_f, **kw)


class TestPresets:
    def test_catalog(self):
        assert available_presets() == ["creation", "deformation1", "detachment", "injection2"]

    @pytest.mark.parametrize("name", list(ENDPOINTS))
    def test_endpoints_match_equations(self, name):
        n, initial, final = ENDPOINTS[name]
        p = preset(name)
        assert p.n_qubits == n
        assert p.h_initial.equals(stabilizer_sum(n, initial))
        assert p.h_final.equals(stabilizer_sum(n, final))

    @pytest.mark.parametrize("name", list(ENDPOINTS))
    def test_all_coefficients_minus_half(self, name):
        p = preset(name)
        for term in p.h_initial.terms + p.h_final.simplify().terms:
            assert term.coefficient == -0.5

    def test_detachment_term_counts(self):
        p = preset("detachment")
        assert len(p.h_initial) == 6 and len(p.h_final.simplify()) == 6

    @pytest.mark.parametrize("name,objective", [
        ("creation", "state_transfer"), ("deformation1", "state_transfer"),
        ("injection2", "state_transfer"), ("detachment", "ensemble_gate")])
    def test_objectives(self, name, objective):
        assert preset(name).objective == objective

    def test_unknown_lists_available(self):
        with pytest.raises(UnknownProblemError, match="creation"):
            preset("attachment")

    def test_creation_initial_state_stabilized(self):
        p = preset("creation")
        psi = p.initial_vector()
        for term in p.h_initial.terms:
            unit = term.scaled(1 / term.coefficient)
            np.testing.assert_allclose(apply_operator(unit, psi), psi, atol=1e-12)

    def test_injection2_reference_reaches_final_sector(self):
        # X on the sites 2,3,4,6,7,8 is conserved; the final ground space needs +1
        p = preset("injection2")
        psi = p.initial_vector()
        x = realize(pauli(9, "X", [2, 3, 4, 6, 7, 8]))
        assert np.vdot(psi, x @ psi).real == pytest.approx(1.0, abs=1e-12)


class TestControlSplit:
    def test_creation_control_terms(self):
        n, initial, final = ENDPOINTS["creation"]
        _, h2 = control_split(stabilizer_sum(n, initial), stabilizer_sum(n, final))
        expected = OperatorSum(9, (
            pauli(9, "Z", [2, 4, 5, 7], 0.5), pauli(9, "Z", [3, 5, 6, 8], 0.5),
            pauli(9, "X", [1, 2, 3, 5], 0.5), pauli(9, "X", [5, 7, 8, 9], 0.5),
            pauli(9, "X", [1, 2, 3], -0.5), pauli(9, "X", [7, 8, 9], -0.5),
            pauli(9, "X", [5], -0.5)))
        assert h2.equals(expected)

    def test_identical_endpoints(self):
        h = stabilizer_sum(3, [("X", (1, 2))])
        h1, h2 = control_split(h, h)
        assert h1.equals(h) and len(h2.simplify()) == 0

    def test_from_zero(self):
        h = stabilizer_sum(3, [("X", (1, 2))])
        _, h2 = control_split(OperatorSum(3, ()), h)
        assert h2.equals(h)

    def test_size_mismatch(self):
        with pytest.raises(ValidationError):
            control_split(OperatorSum(2, ()), OperatorSum(3, ()))


class TestCanonicalGroundState:
    def test_single_z(self):
        psi = canonical_ground_state(OperatorSum(1, (pauli(1, "Z", [1], -0.5),)), "0")
        np.testing.assert_allclose(psi, [1, 0])

    def test_creation_energy(self):
        h = preset("creation").h_initial
        psi = canonical_ground_state(h)
        assert np.vdot(psi, realize(h) @ psi).real == pytest.approx(-2.0, abs=1e-12)

    def test_creation_final_energy(self):
        h = preset("creation").h_final
        psi = canonical_ground_state(h, "+" * 9)
        assert np.vdot(psi, realize(h) @ psi).real == pytest.approx(-1.5, abs=1e-12)

    def test_annihilated_reference(self):
        with pytest.raises(DegenerateReferenceError):
            canonical_ground_state(OperatorSum(1, (pauli(1, "Z", [1], -0.5),)), "1")

    def test_non_commuting_terms(self):
        h = OperatorSum(1, (pauli(1, "Z", [1], -0.5), pauli(1, "X", [1], -0.5)))
        with pytest.raises(ValidationError):
            canonical_ground_state(h)

    def test_projector_order_irrelevant(self):
        h = preset("creation").h_initial
        ref = canonical_ground_state(h)
        for perm in itertools.islice(itertools.permutations(h.terms), 0, 24, 5):
            psi = canonical_ground_state(OperatorSum(9, tuple(perm)))
            assert abs(np.vdot(ref, psi)) == pytest.approx(1.0, abs=1e-12)


class TestProblemValidation:
    def test_state_transfer_defaults_to_zero_reference(self):
        assert small_problem().initial_state == InitialState(reference="00")

    def test_reference_length(self):
        with pytest.raises(ValidationError):
            small_problem(initial_state=InitialState(reference="000"))

    def test_bad_objective(self):
        with pytest.raises(ValidationError):
            small_problem(objective="fastest")

    def test_explicit_state_must_be_ground(self):
        amps = (0, 1, 0, 0)  # excited for -Z1 - Z2
        p = small_problem(initial_state=InitialState(amplitudes=amps))
        with pytest.raises(ValidationError):
            p.initial_vector()


class TestProblemFiles:
    @pytest.mark.parametrize("name", list(ENDPOINTS))
    def test_round_trip(self, name, tmp_path):
        p = preset(name)
        save_problem(p, tmp_path / "p.json")
        q = load_problem(tmp_path / "p.json")
        assert q.equals(p) and q.name == p.name

    def test_explicit_amplitudes(self):
        d = problem_to_dict(small_problem())
        d["initial_state"] = {"reference": [[1.0, 0.0], 0, 0, 0]}
        assert np.allclose(problem_from_dict(d).initial_vector(), [1, 0, 0, 0])

    def test_unknown_field(self):
        d = problem_to_dict(small_problem())
        d["gap"] = 2
        with pytest.raises(ValidationError, match="gap"):
            problem_from_dict(d)

    def test_site_error_points_at_term(self):
        d = problem_to_dict(small_problem())
        d["h_final"][1]["paulis"][0]["site"] = 5
        with pytest.raises(ValidationError, match=r"h_final\[1\]"):
            problem_from_dict(d)

    def test_complex_coefficient(self):
        d = problem_to_dict(small_problem())
        d["h_initial"][0]["coeff"] = [0.5, 0.1]
        with pytest.raises(ValidationError):
            problem_from_dict(d)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ValidationError):
            load_problem(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ValidationError):
            load_problem(tmp_path / "absent.json")

    def test_missing_fields(self):
        with pytest.raises(ValidationError, match="h_final"):
            problem_from_dict({"name": "x", "n_qubits": 1, "objective": "gate", "h_initial": []})

    def test_file_is_json(self, tmp_path):
        save_problem(preset("creation"), tmp_path / "c.json")
        data = json.loads((tmp_path / "c.json").read_text())
        assert data["n_qubits"] == 9 and data["objective"] == "state_transfer"
