import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from spamcal.model import (
    FOUR_GATES, SIX_GATES, BlochVector, FullParams, GateOp, PovmParams, SpamParams, apply_depolarizing, apply_gate,
    eight_gates, full_sequence_probability, gate_matrix, gate_power_matrix, outcome_probability,
    rotation_matrix_tilted, sequence_probabilities, six_gate_probabilities_general, spam_sequence_probabilities,
)

PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]]),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def bloch_to_rho(r):
    return 0.5 * (np.eye(2) + r[0] * PAULI["x"] + r[1] * PAULI["y"] + r[2] * PAULI["z"])


def rho_to_bloch(rho):
    return np.real([np.trace(rho @ PAULI[a]) for a in "xyz"])


def unitary(axis, angle):
    """exp(-i angle sigma/2)."""
    return math.cos(angle / 2) * np.eye(2) - 1j * math.sin(angle / 2) * PAULI[axis]


unit_vectors = st.tuples(st.floats(-1, 1), st.floats(-1, 1), st.floats(-1, 1)).filter(
    lambda v: 1e-3 < sum(c * c for c in v) <= 1.0)


class TestTypes:
    def test_bloch_norm_guard(self):
        BlochVector(0, 0, 1 + 5e-13)
        with pytest.raises(ValueError):
            BlochVector(0.8, 0.0, 0.8)

    def test_spam_params_constraints(self):
        with pytest.raises(ValueError):
            SpamParams(pi0=0.6, piz=0.5)  # pi0 + piz > 1
        with pytest.raises(ValueError):
            SpamParams(pi0=0.3, piz=0.4)  # pi0 - piz < 0
        with pytest.raises(ValueError):
            SpamParams(x0=0.2, z0=0.99)

    def test_full_params_ranges(self):
        with pytest.raises(ValueError):
            FullParams(theta=2.0)
        with pytest.raises(ValueError):
            FullParams(eps=1.0)
        p = FullParams(SpamParams(0.05, -0.03, 0.99, 0.505, 0.485), 0.01, 5e-4)
        assert FullParams.from_array(p.as_array()) == p

    def test_gate_labels_round_trip(self):
        for g in SIX_GATES + eight_gates(8) + (GateOp.y90(-1, 7),):
            assert GateOp.parse(g.label) == g
        assert GateOp.x90(1, 0).is_identity
        with pytest.raises(ValueError):
            GateOp.parse("z90p")
        with pytest.raises(ValueError):
            GateOp.x90(1, -1)


class TestApplyGate:
    def test_flip(self):
        assert np.allclose(apply_gate(GateOp.flip(), BlochVector(0, 0, 1)).as_array(), [0, 0, -1], atol=1e-15)

    def test_x90_convention(self):
        assert np.allclose(apply_gate(GateOp.x90(1), BlochVector(0, 0, 1)).as_array(), [0, -1, 0], atol=1e-15)

    def test_y90_convention(self):
        assert np.allclose(apply_gate(GateOp.y90(1), BlochVector(0, 0, 1)).as_array(), [1, 0, 0], atol=1e-15)

    @pytest.mark.parametrize("axis", ["x", "y"])
    @pytest.mark.parametrize("sign", [1, -1])
    def test_matches_qubit_unitary(self, axis, sign):
        # U rho U^dagger on a density matrix, independent of the Bloch formulas
        theta = 0.037
        r = np.array([0.3, -0.2, 0.6])
        u = unitary(axis, sign * (math.pi / 2 + theta))
        ref = rho_to_bloch(u @ bloch_to_rho(r) @ u.conj().T)
        got = gate_power_matrix(axis, sign, 1, theta) @ r
        assert np.allclose(got, ref, atol=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(unit_vectors, st.sampled_from(SIX_GATES + eight_gates(3)), st.floats(-0.1, 0.1))
    def test_norm_preserved(self, v, gate, theta):
        r = BlochVector(*v)
        assert abs(apply_gate(gate, r, theta).norm - r.norm) < 1e-12


class TestGatePower:
    def test_full_turn(self):
        assert np.allclose(gate_power_matrix("x", 1, 4, 0.0), np.eye(3), atol=1e-15)

    def test_half_turn(self):
        y, z = 0.3, 0.7
        assert np.allclose(gate_power_matrix("x", 1, 2, 0.0) @ [0, y, z], [0, -y, -z], atol=1e-15)

    def test_j33_brute_force(self):
        one = gate_power_matrix("x", 1, 1, 0.02)
        assert np.max(np.abs(gate_power_matrix("x", 1, 33, 0.02) - np.linalg.matrix_power(one, 33))) < 1e-10

    @pytest.mark.parametrize("axis", ["x", "y"])
    @pytest.mark.parametrize("sign", [1, -1])
    def test_orthogonal(self, axis, sign):
        for j in (0, 1, 5, 33):
            m = gate_power_matrix(axis, sign, j, 0.03)
            assert np.allclose(m @ m.T, np.eye(3), atol=1e-12)
            assert abs(np.linalg.det(m) - 1) < 1e-12

    def test_matches_scipy_rotation(self):
        # active rotation by +angle about +x / +y
        for axis, vec in (("x", [1, 0, 0]), ("y", [0, 1, 0])):
            for sign in (1, -1):
                angle = sign * 5 * (math.pi / 2 + 0.01)
                ref = Rotation.from_rotvec(angle * np.array(vec)).as_matrix()
                assert np.allclose(gate_power_matrix(axis, sign, 5, 0.01), ref, atol=1e-13)

    def test_negative_power_rejected(self):
        with pytest.raises(ValueError):
            gate_power_matrix("x", 1, -1)


class TestTilted:
    def test_untilted_reduces_to_x90(self):
        assert np.allclose(rotation_matrix_tilted(0, 0, math.pi / 2), gate_power_matrix("x", 1, 1), atol=1e-15)

    def test_zero_angle(self):
        assert np.allclose(rotation_matrix_tilted(0.3, -0.4, 0.0), np.eye(3))

    def test_z_axis(self):
        assert np.allclose(rotation_matrix_tilted(0, 1, math.pi / 2) @ [1, 0, 0], [0, 1, 0], atol=1e-15)

    @settings(max_examples=40, deadline=None)
    @given(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7), st.floats(-4, 4))
    def test_matches_scipy(self, yh, zh, angle):
        xh = math.sqrt(max(0.0, 1 - yh * yh - zh * zh))
        ref = Rotation.from_rotvec(angle * np.array([xh, yh, zh])).as_matrix()
        assert np.allclose(rotation_matrix_tilted(yh, zh, angle), ref, atol=1e-12)

    def test_axis_out_of_range(self):
        with pytest.raises(ValueError):
            rotation_matrix_tilted(0.8, 0.8, 1.0)


class TestDepolarizing:
    def test_no_noise(self):
        r = BlochVector(0.1, 0.2, 0.3)
        assert apply_depolarizing(r, 0.0, 9) == r

    def test_single_step(self):
        assert np.allclose(apply_depolarizing(BlochVector(0, 0, 1), 0.0005, 1).as_array(), [0, 0, 0.9995])

    def test_two_steps(self):
        assert np.allclose(apply_depolarizing(BlochVector(0, 0, 1), 0.5, 2).as_array(), [0, 0, 0.25])

    @settings(max_examples=50, deadline=None)
    @given(unit_vectors, st.floats(0, 0.9), st.integers(0, 40))
    def test_monotone_shrinkage(self, v, eps, j):
        r = BlochVector(*v)
        out = apply_depolarizing(r, eps, j).norm
        assert out <= r.norm + 1e-15
        if eps > 1e-6 and j > 0:
            assert out < r.norm


class TestProbabilities:
    def test_ideal_projector(self):
        assert outcome_probability(BlochVector(0, 0, 1), PovmParams.ideal()) == 1.0
        assert outcome_probability(BlochVector(0, 0, -1), PovmParams.ideal()) == 0.0

    def test_asymmetric_readout(self):
        assert outcome_probability(BlochVector(0, 0, 1), PovmParams(0.505, 0, 0, 0.485)) == pytest.approx(0.99, abs=1e-15)

    def test_six_ideal(self):
        assert np.allclose(spam_sequence_probabilities(SpamParams()), [1, 0, 0.5, 0.5, 0.5, 0.5])

    def test_six_hand_values(self):
        f = spam_sequence_probabilities(SpamParams(0.05, 0.0, 0.99, 0.505, 0.49))
        assert np.allclose(f, [0.9901, 0.0199, 0.505, 0.505, 0.4805, 0.5295], atol=1e-15)

    @settings(max_examples=60, deadline=None)
    @given(unit_vectors, st.floats(0.4, 0.6), st.floats(0.0, 0.4))
    def test_six_equals_pipeline(self, v, pi0, piz):
        piz = min(piz, pi0, 1 - pi0)
        p = SpamParams(*v, pi0, piz)
        pipe = [outcome_probability(apply_gate(g, p.bloch), p.povm) for g in SIX_GATES]
        assert np.max(np.abs(spam_sequence_probabilities(p) - pipe)) < 1e-12
        general = six_gate_probabilities_general(p.bloch, PovmParams(pi0, 0.0, 0.0, piz))
        assert np.array_equal(general, spam_sequence_probabilities(p))

    def test_general_forms_match_pipeline_with_pix_piy(self):
        r0 = BlochVector(0.1, -0.2, 0.9)
        povm = PovmParams(0.5, 0.01, -0.02, 0.45)
        pipe = [outcome_probability(apply_gate(g, r0), povm) for g in SIX_GATES]
        assert np.allclose(six_gate_probabilities_general(r0, povm), pipe, atol=1e-15)

    def test_full_reduces_to_spam(self):
        p = SpamParams(0.05, -0.03, 0.99, 0.505, 0.485)
        full = [full_sequence_probability(FullParams(p), g) for g in SIX_GATES]
        assert np.max(np.abs(np.array(full) - spam_sequence_probabilities(p))) < 1e-12

    def test_x90_power_32_is_identity(self):
        assert full_sequence_probability(FullParams(), GateOp.x90(1, 32)) == pytest.approx(1.0, abs=1e-12)

    def test_x90_power_33_stepwise(self):
        theta, eps = 0.01, 0.0005
        rho = bloch_to_rho([0, 0, 1])
        u = unitary("x", math.pi / 2 + theta)
        for _ in range(33):
            rho = u @ rho @ u.conj().T
            rho = (1 - eps) * rho + eps * np.eye(2) / 2
        expected = np.real(rho[0, 0])
        got = full_sequence_probability(FullParams(theta=theta, eps=eps), GateOp.x90(1, 33))
        assert abs(got - expected) < 1e-10

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(3)
        seqs = eight_gates(8) + FOUR_GATES + (GateOp.y90(-1, 9),)
        for _ in range(20):
            p = FullParams(SpamParams(*rng.uniform(-0.1, 0.1, 2), rng.uniform(0.9, 0.99),
                                      rng.uniform(0.45, 0.55), rng.uniform(0.4, 0.45)),
                           rng.uniform(-0.1, 0.1), rng.uniform(0, 0.01))
            vec = sequence_probabilities(p.as_array()[None, :], seqs)[0]
            assert np.allclose(vec, [full_sequence_probability(p, s) for s in seqs], atol=1e-13)
            five = sequence_probabilities(p.spam.as_array()[None, :], seqs)[0]
            ideal_gates = [full_sequence_probability(FullParams(p.spam), s) for s in seqs]
            assert np.allclose(five, ideal_gates, atol=1e-13)

    def test_gate_matrix_flip_is_ideal(self):
        assert np.array_equal(gate_matrix(GateOp.flip(), 0.05), np.diag([1.0, -1.0, -1.0]))
        assert GateOp.flip().depolarizing_steps == 1
        assert GateOp.identity().depolarizing_steps == 0
        assert GateOp.x90(1, 33).depolarizing_steps == 33
