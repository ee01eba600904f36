import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from quasibrown.exceptions import StructuralError, ValidationError
from quasibrown.signals import (QuasiPeriodicSignal, Trajectory, classify_convergence, evaluate_qp,
                                tail_behaviour)


def mp_eval(a, nu, offset, t, dps=160):
    """Term-by-term sum in high precision."""
    with mpmath.workdps(dps):
        s = mpmath.mpf(offset)
        for an, vn in zip(a, nu):
            s += mpmath.re(mpmath.mpc(an.real, an.imag) * mpmath.exp(1j * mpmath.mpf(vn) * mpmath.mpf(t)))
        return float(s)


def test_zero_frequency_constant():
    sig = QuasiPeriodicSignal([1.0], [0.0])
    assert evaluate_qp(sig, [0.7]).values[0] == 1.0


def test_re_exp_i_pi():
    sig = QuasiPeriodicSignal([1.0], [np.pi])
    assert evaluate_qp(sig, [1.0]).values[0] == pytest.approx(-1.0, abs=1e-15)


def test_two_terms_against_high_precision():
    a = np.array([0.5, 1 / 3], dtype=complex)
    nu = np.array([1.0, 2.0])
    got = evaluate_qp(QuasiPeriodicSignal(a, nu), [0.5]).values[0]
    assert got == pytest.approx(mp_eval(a, nu, 0.0, 0.5), abs=2e-16)


def test_many_terms_against_high_precision():
    gen = np.random.default_rng(3)
    a = gen.normal(size=200) + 1j * gen.normal(size=200)
    nu = gen.uniform(-50, 50, 200)
    t = np.array([0.0, 0.3, 1.7, 9.1])
    got = evaluate_qp(QuasiPeriodicSignal(a, nu, 0.25), t).values
    want = [mp_eval(a, nu, 0.25, ti) for ti in t]
    # terms themselves carry ~1 ulp error from cos/sin
    np.testing.assert_allclose(got, want, rtol=0, atol=200 * 4e-16 * np.sum(np.abs(a)) / 10)


def test_meta_and_length():
    tr = evaluate_qp(QuasiPeriodicSignal([1, 2], [1, 2]), [0, 1, 2], meta={"seed": 4})
    assert tr.meta["truncation"] == 2 and tr.meta["seed"] == 4 and len(tr) == 3


def test_empty_signal_is_offset():
    tr = evaluate_qp(QuasiPeriodicSignal([], [], 2.5), [0.0, 1.0])
    np.testing.assert_array_equal(tr.values, [2.5, 2.5])


def test_mismatched_lengths():
    with pytest.raises(StructuralError):
        QuasiPeriodicSignal([1, 2], [1.0])


@pytest.mark.parametrize("a,nu", [([np.nan], [1.0]), ([1.0], [np.inf])])
def test_non_finite_inputs(a, nu):
    with pytest.raises(ValidationError):
        QuasiPeriodicSignal(a, nu)


def test_times_must_increase():
    sig = QuasiPeriodicSignal([1.0], [1.0])
    with pytest.raises(ValidationError):
        evaluate_qp(sig, [0.0, 0.0])
    with pytest.raises(ValidationError):
        evaluate_qp(sig, [0.0, np.nan])


def test_trajectory_validation():
    with pytest.raises(StructuralError):
        Trajectory([0, 1], [1.0])
    with pytest.raises(ValidationError):
        Trajectory([0, 1], [1.0, np.inf])


def test_linearity_of_concatenation():
    gen = np.random.default_rng(0)
    s1 = QuasiPeriodicSignal(gen.normal(size=30) + 1j * gen.normal(size=30), gen.normal(size=30), 1.0)
    s2 = QuasiPeriodicSignal(gen.normal(size=20), gen.normal(size=20) * 5, -0.5)
    t = np.linspace(0, 3, 40)
    both = evaluate_qp(s1.concat(s2), t).values
    np.testing.assert_allclose(both, evaluate_qp(s1, t).values + evaluate_qp(s2, t).values,
                               rtol=0, atol=1e-13)


def test_conjugate_symmetry():
    gen = np.random.default_rng(1)
    a = gen.normal(size=25) + 1j * gen.normal(size=25)
    nu = gen.normal(size=25) * 3
    t = np.linspace(0, 2, 30)
    v1 = evaluate_qp(QuasiPeriodicSignal(a, nu), t).values
    v2 = evaluate_qp(QuasiPeriodicSignal(np.conj(a), -nu), t).values
    np.testing.assert_allclose(v1, v2, rtol=0, atol=1e-14)


def test_reordering_10k_terms_is_exact():
    # fsum is correctly rounded, so a permutation of identical terms gives the same float
    gen = np.random.default_rng(2)
    a = gen.normal(size=10_000) / np.arange(1, 10_001)
    nu = np.pi * np.arange(1, 10_001)
    perm = gen.permutation(10_000)
    t = np.linspace(0, 1, 7)
    v1 = evaluate_qp(QuasiPeriodicSignal(a, nu), t).values
    v2 = evaluate_qp(QuasiPeriodicSignal(a[perm], nu[perm]), t).values
    np.testing.assert_array_equal(v1, v2)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10), st.floats(-20, 20)),
                min_size=0, max_size=12),
       st.floats(-5, 5), st.floats(0, 10))
def test_matches_plain_sum(terms, offset, t):
    a = np.array([complex(x, y) for x, y, _ in terms], dtype=complex)
    nu = np.array([v for *_, v in terms], dtype=float)
    got = evaluate_qp(QuasiPeriodicSignal(a, nu, offset), [t]).values[0]
    want = offset + np.sum((a * np.exp(1j * nu * t)).real)
    assert got == pytest.approx(want, abs=1e-12 * (1 + np.sum(np.abs(a))))


# --------------------------------------------------------------------------


def test_inverse_cube_amplitudes_are_nbml():
    v = classify_convergence(lambda n: 1.0 / n ** 3, lambda n: n.astype(float), term_budget=10 ** 5)
    assert v.verdict == "NBML"
    assert "not a proof" in v.rationale


def test_inverse_square_amplitudes_are_bml_candidate():
    v = classify_convergence(lambda n: 1.0 / n ** 2, lambda n: n.astype(float), term_budget=10 ** 5)
    assert v.verdict == "BML-candidate"
    # sum |a||nu| is the harmonic sum
    assert v.sum_abs_a_nu[-1] == pytest.approx(math.log(1e5) + 0.5772156649, abs=1e-4)


def test_finite_frequency_set_is_nbml():
    assert classify_convergence([1, 1], [1, 2]).verdict == "NBML"


def test_empty_is_nbml():
    v = classify_convergence([], [])
    assert v.verdict == "NBML" and v.rationale == "finite/empty sum"


def test_short_sequence_under_budget_is_finite():
    v = classify_convergence(np.ones(50), np.arange(50.0), term_budget=100)
    assert v.verdict == "NBML" and "finite" in v.rationale


def test_inconclusive_reachable():
    # sum 1/n^2 at budget 1e4 neither stalls nor grows like ln n
    v = classify_convergence(lambda n: 1.0 / n ** 2, lambda n: np.ones(n.size), term_budget=10 ** 4)
    assert v.verdict == "inconclusive"


def test_budget_window_precondition():
    with pytest.raises(ValidationError):
        classify_convergence(lambda n: 1.0 / n, lambda n: n, term_budget=5, growth_window=10)
    with pytest.raises(ValidationError):
        classify_convergence([1.0], [1.0], growth_window=1)
    with pytest.raises(ValidationError):
        classify_convergence(lambda n: 1.0 / n, [1.0, 2.0])


@settings(max_examples=30, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=60))
def test_partial_sums_nondecreasing(pairs):
    a = [p[0] for p in pairs]
    nu = [p[1] for p in pairs]
    v = classify_convergence(a, nu)
    assert np.all(np.diff(v.sum_abs_a) >= 0)
    assert np.all(np.diff(v.sum_abs_a_nu) >= 0)


def test_tail_exponent_of_power_law():
    n = np.arange(1, 2 ** 14 + 1)
    rep = tail_behaviour(np.cumsum(n ** -1.5), 10)
    assert rep.decay_exponent == pytest.approx(1.5, abs=0.02)
    assert not rep.stalled
