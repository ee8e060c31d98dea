import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spamcal.model import FOUR_GATES, SIX_GATES, FullParams, PovmParams, SpamParams
from spamcal.povm_mle import FourProbEstimates, check_povm_constraints, estimate_povm_mle, gaussian_validity
from spamcal.simulator import ExperimentPlan, run_experiment

freq = st.floats(0.0, 1.0)


def test_ideal_readout():
    est = estimate_povm_mle(FourProbEstimates(1.0, 0.0, 0.5, 0.5, 16384))
    assert est.povm == PovmParams(0.5, 0.0, 0.0, 0.5)
    assert est.variances["pi0"] == 0.0 and est.variances["piz"] == 0.0


def test_hand_values():
    est = estimate_povm_mle(FourProbEstimates(0.99, 0.02, 0.5, 0.5, 16384))
    assert est.povm.pi0 == pytest.approx(0.505, abs=1e-15)
    assert est.povm.piz == pytest.approx(0.485, abs=1e-15)
    assert est.povm.pix == pytest.approx(-0.005, abs=1e-15)
    assert est.povm.piy == pytest.approx(-0.005, abs=1e-15)
    assert est.variances["pi0"] == pytest.approx((0.99 * 0.01 + 0.02 * 0.98) / (4 * 16384), rel=1e-12)
    assert est.variances["pi0"] == pytest.approx(4.5e-7, rel=0.01)
    assert est.variances["pix"] == pytest.approx((4 * 0.25 + 0.99 * 0.01 + 0.02 * 0.98) / (4 * 16384), rel=1e-12)


@given(freq, freq, freq, freq)
def test_forward_round_trip(fz, fmz, fx, fy):
    p = estimate_povm_mle(FourProbEstimates(fz, fmz, fx, fy, 100)).povm
    assert p.pi0 + p.piz == pytest.approx(fz, abs=1e-15)
    assert p.pi0 - p.piz == pytest.approx(fmz, abs=1e-15)
    assert p.pi0 + p.pix == pytest.approx(fx, abs=1e-15)
    assert p.pi0 + p.piy == pytest.approx(fy, abs=1e-15)


def test_variance_scaling():
    a = estimate_povm_mle(FourProbEstimates(0.99, 0.02, 0.49, 0.51, 16384)).std
    b = estimate_povm_mle(FourProbEstimates(0.99, 0.02, 0.49, 0.51, 4 * 16384)).std
    for k in a:
        assert b[k] == pytest.approx(a[k] / 2, rel=1e-12)


def test_variance_scaling_empirical():
    truth = FullParams(SpamParams(pi0=0.505, piz=0.485))
    spreads = []
    for n in (4096, 4 * 4096):
        est = [estimate_povm_mle(FourProbEstimates.from_counts(run_experiment(truth, ExperimentPlan(FOUR_GATES, n, s)))).povm.pi0
               for s in range(400)]
        spreads.append(np.std(est))
    assert spreads[1] / spreads[0] == pytest.approx(0.5, rel=0.1)


def test_from_counts_picks_gates():
    truth = FullParams(SpamParams(pi0=0.505, piz=0.485))
    c = run_experiment(truth, ExperimentPlan(SIX_GATES, 16384, 3))
    f = FourProbEstimates.from_counts(c)
    fr = dict(zip(c.sequences, c.frequencies))
    assert f.f_z == fr[SIX_GATES[0]] and f.f_mz == fr[SIX_GATES[1]]
    assert f.f_y == fr[SIX_GATES[2]] and f.f_x == fr[SIX_GATES[4]]


def test_recovers_readout_in_closed_loop():
    truth = FullParams(SpamParams(pi0=0.505, piz=0.485))
    hits = []
    for s in range(100):
        est = estimate_povm_mle(FourProbEstimates.from_counts(run_experiment(truth, ExperimentPlan(FOUR_GATES, 16384, s))))
        hits.append(abs(est.povm.pi0 - 0.505) < 3 * est.std["pi0"] and abs(est.povm.piz - 0.485) < 3 * est.std["piz"])
    assert np.mean(hits) >= 0.95


def test_invalid_frequencies():
    with pytest.raises(ValueError):
        FourProbEstimates(1.1, 0, 0.5, 0.5, 10)
    with pytest.raises(ValueError):
        FourProbEstimates(1, 0, 0.5, 0.5, 0)


class TestConstraints:
    def test_ideal_boundary(self):
        ok, slack = check_povm_constraints(PovmParams(0.5, 0, 0, 0.5))
        assert ok and slack == pytest.approx(0.0, abs=1e-15)

    def test_violation(self):
        ok, slack = check_povm_constraints(PovmParams(0.5, 0.6, 0, 0))
        assert not ok and slack < 0

    def test_minimum_slack(self):
        p = PovmParams(0.505, -0.005, -0.005, 0.485)
        ok, slack = check_povm_constraints(p)
        vec2 = 0.485 ** 2 + 2 * 0.005 ** 2
        assert ok
        # pi0^2 - |pi|^2 = 0.0198 is the looser side; (1 - pi0)^2 - |pi|^2 binds
        assert 0.505 ** 2 - vec2 == pytest.approx(0.0198, abs=1e-4)
        assert slack == pytest.approx(0.495 ** 2 - vec2, abs=1e-15)
        assert slack == pytest.approx(0.00975, abs=1e-15)

    def test_report_flags_failures(self):
        est = estimate_povm_mle(FourProbEstimates(1.0, 0.0, 1.0, 0.5, 100))
        d = est.to_dict()
        assert d["constraints_pass"] is False and d["parameters"]["pix"]["mean"] == 0.5


class TestGaussianValidity:
    def test_cases(self):
        assert gaussian_validity(16384, 0.5)
        assert gaussian_validity(16384, 0.01)
        assert not gaussian_validity(16384, 0.0001)
        assert not gaussian_validity(16384, 0.9999)
        assert gaussian_validity(100, 0.05, q=4)

    def test_bad_n(self):
        with pytest.raises(ValueError):
            gaussian_validity(0, 0.5)
