import math

import numpy as np
import pytest
from scipy import integrate

from quasibrown import classical_processes as cp
from quasibrown import ensembles as en
from quasibrown.exceptions import StructuralError, ValidationError
from quasibrown.signals import Trajectory


def spec4(beta=0.0, e_max=1e6, **kw):
    kw.setdefault("min_ess", 0.0)  # short test chains; the warning has its own test
    return en.GibbsEnsembleSpec(en.box_spectrum(4), beta=beta, e_max=e_max, n_modes=4, **kw)


def reweighted_sphere_oracle(zeta, beta, e_max, n_draws=400_000, seed=0):
    """E|c_1|^2 under exp(-beta E) 1[E < e_max] on the unit sphere in C^n, by importance weights."""
    gen = np.random.default_rng(seed)
    z = gen.normal(size=(n_draws, zeta.size)) + 1j * gen.normal(size=(n_draws, zeta.size))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    w1 = np.abs(z[:, 0]) ** 2
    e = (np.abs(z) ** 2) @ zeta
    wt = np.exp(-beta * (e - zeta[0])) * (e < e_max)
    mean = np.sum(wt * w1) / np.sum(wt)
    # delta-method standard error of a ratio estimator
    se = np.sqrt(np.sum((wt * (w1 - mean)) ** 2)) / np.sum(wt)
    return mean, se


# -- sampler ---------------------------------------------------------------


def test_infinite_temperature_gives_uniform_weights():
    s = en.gibbs_sample(spec4(seed=1), 8000)
    m = en.coefficient_moments(s)
    assert np.all(np.abs(m.second - 0.25) <= 4 * m.second_se)


def test_every_sample_satisfies_constraints():
    spec = spec4(beta=0.05, e_max=60.0, seed=2)
    s = en.gibbs_sample(spec, 4000)
    norms = np.sum(np.abs(s.c) ** 2, axis=1)
    assert np.max(np.abs(norms - 1)) < 1e-12
    assert np.all(s.energies() < 60.0)
    assert all(cs.energy(spec.zeta) < 60.0 for cs in list(s)[:50])
    assert 0 < s.acceptance_rate < 1


@pytest.mark.parametrize("factor", [1.0, 2.0, 4.0])
def test_ground_weight_matches_reweighted_sphere(factor):
    zeta = en.box_spectrum(4).eigenvalues
    beta = factor / zeta[0]
    s = en.gibbs_sample(en.GibbsEnsembleSpec(zeta, beta=beta, e_max=1e6, n_modes=4, seed=3), 16_000)
    m = en.coefficient_moments(s)
    want, want_se = reweighted_sphere_oracle(zeta, beta, 1e6)
    assert abs(m.second[0] - want) <= 4 * math.hypot(m.second_se[0], want_se)


def test_ground_weight_increases_with_beta():
    zeta = en.box_spectrum(4).eigenvalues
    vals = [reweighted_sphere_oracle(zeta, f / zeta[0], 1e6, 100_000)[0] for f in (1, 2, 4)]
    got = [en.coefficient_moments(en.gibbs_sample(
        en.GibbsEnsembleSpec(zeta, f / zeta[0], 1e6, 4, seed=4), 8000)).second[0] for f in (1, 2, 4)]
    assert vals[0] < vals[1] < vals[2]
    assert got[0] < got[1] < got[2]


def test_cap_is_respected_by_oracle_and_sampler():
    zeta = en.box_spectrum(4).eigenvalues
    s = en.gibbs_sample(en.GibbsEnsembleSpec(zeta, 0.0, 40.0, 4, seed=5), 16_000)
    m = en.coefficient_moments(s)
    want, want_se = reweighted_sphere_oracle(zeta, 0.0, 40.0)
    assert abs(m.second[0] - want) <= 4 * math.hypot(m.second_se[0], want_se)


def test_sampler_is_deterministic():
    a = en.gibbs_sample(spec4(seed=7), 500).c
    b = en.gibbs_sample(spec4(seed=7), 500).c
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, en.gibbs_sample(spec4(seed=8), 500).c)


def test_low_ess_warns():
    with pytest.warns(en.SamplingQualityWarning):
        s = en.gibbs_sample(spec4(seed=1, min_ess=1e9), 400)
    assert s.warnings and "effective sample size" in s.warnings[0]


def test_spec_validation():
    with pytest.raises(ValidationError):
        spec4(e_max=1.0)  # below zeta_1
    with pytest.raises(ValidationError):
        spec4(beta=-1.0)
    with pytest.raises(ValidationError):
        en.GibbsEnsembleSpec(en.box_spectrum(4), 0.0, 100.0, n_modes=1)
    with pytest.raises(ValidationError):
        en.gibbs_sample(spec4(), 0)


def test_default_burn_in_and_thinning():
    s = spec4()
    assert s.burn_in_steps == 4000 and s.thin_steps == 4


def test_modes_for_weight():
    z = np.arange(1, 101, dtype=float)
    n = en.modes_for_weight(z, 1.0)
    assert math.exp(-(z[n - 1] - z[0])) < 1e-6 <= math.exp(-(z[n - 2] - z[0]))
    assert en.modes_for_weight(z, 0.0) == 100


# -- moments ---------------------------------------------------------------


def test_moment_report_shapes_and_symmetries():
    s = en.gibbs_sample(spec4(seed=9), 4000)
    m = en.coefficient_moments(s)
    assert m.cross.shape == (4, 4) and m.n_samples == len(s)
    np.testing.assert_allclose(np.diag(m.cross).real, m.second, rtol=1e-12)
    np.testing.assert_allclose(m.pair, m.pair.T, rtol=1e-12)
    assert sum(m.second) == pytest.approx(1.0, abs=1e-12)
    d = m.to_dict()
    assert set(d["cross"]) == {"re", "im"}


def test_moments_need_enough_samples():
    with pytest.raises(ValidationError):
        en.coefficient_moments([np.ones(3) / math.sqrt(3)] * 50)


def test_integrated_time_of_ar1():
    phi = 0.5
    gen = np.random.default_rng(0)
    x = np.zeros((16, 20_000))
    e = gen.normal(size=x.shape)
    for i in range(1, x.shape[1]):
        x[:, i] = phi * x[:, i - 1] + e[:, i]
    tau = en.integrated_time(x)[0]
    assert tau == pytest.approx((1 + phi) / (1 - phi), rel=0.05)
    assert en.effective_sample_size(x)[0] == pytest.approx(x.size / tau)


# -- position matrix -------------------------------------------------------


def test_box_position_matrix_structure():
    g = en.box_position_matrix(10, A=1.0).g
    assert np.all(np.diag(g) == 0)
    np.testing.assert_array_equal(g, g.T)
    assert abs(g[0, 1]) == pytest.approx(32 / (9 * math.pi ** 2), rel=1e-15)
    assert g[0, 2] == 0.0


@pytest.mark.parametrize("A", [0.5, 1.3])
def test_box_position_matrix_by_quadrature(A):
    def psi(k, x):
        return math.sin(k * math.pi * (x + A) / (2 * A)) / math.sqrt(A)

    g = en.box_position_matrix(5, A).g
    for k in range(1, 6):
        for j in range(1, 6):
            val, _ = integrate.quad(lambda x: psi(k, x) * x * psi(j, x), -A, A, epsabs=1e-13)
            assert g[k - 1, j - 1] == pytest.approx(val, abs=1e-11)


def test_position_matrix_validation():
    with pytest.raises(ValidationError):
        en.PositionMatrix(np.array([[0, 1], [2, 0]]))
    with pytest.raises(StructuralError):
        en.PositionMatrix(np.zeros((2, 3)))


def test_box_b_identity():
    n = 8
    pm = en.PositionMatrix(en.box_position_matrix(n).g, en.box_b_from_overlaps(n))
    assert pm.identity_residual(en.box_spectrum(n).eigenvalues) < 1e-12


# -- MSD -------------------------------------------------------------------


def two_mode_case():
    spec = en.box_spectrum(2)
    g = en.box_position_matrix(2)
    pair = np.array([[0.1, 0.3], [0.3, 0.2]])
    return spec, g, pair


def test_msd_two_mode_by_hand():
    spec, g, pair = two_mode_case()
    t = np.linspace(0, 1, 11)
    dw = spec.eigenvalues[1] - spec.eigenvalues[0]
    want = 4 * pair[0, 1] * g.g[0, 1] ** 2 * (1 - np.cos(dw * t))
    np.testing.assert_allclose(en.msd_curve(spec, g, pair, t).values, want, rtol=1e-12, atol=1e-16)


def test_msd_zero_at_origin_and_quadratic_start():
    spec = en.box_spectrum(6)
    g = en.box_position_matrix(6)
    pair = np.full((6, 6), 1 / 36)
    t = np.array([0.0, 1e-6, 2e-6])
    v = en.msd_curve(spec, g, pair, t).values
    assert v[0] == 0.0
    assert math.log(v[2] / v[1]) / math.log(2) == pytest.approx(2.0, abs=1e-6)


def test_msd_zero_for_diagonal_g():
    spec = en.box_spectrum(3)
    g = en.PositionMatrix(np.diag([1.0, 2.0, 3.0]))
    v = en.msd_curve(spec, g, np.ones((3, 3)), np.linspace(0, 5, 9)).values
    assert np.all(v == 0)


def test_msd_invariant_under_mode_relabelling():
    spec = en.box_spectrum(5)
    g = en.box_position_matrix(5).g
    gen = np.random.default_rng(1)
    pair = gen.uniform(size=(5, 5))
    pair = pair + pair.T
    perm = gen.permutation(5)
    t = np.linspace(0, 2, 13)
    a = en.msd_curve(spec, g, pair, t).values
    b = en.msd_curve(spec.eigenvalues[perm], g[np.ix_(perm, perm)], pair[np.ix_(perm, perm)], t).values
    np.testing.assert_allclose(a, b, rtol=1e-12)


def test_msd_dimension_mismatch():
    with pytest.raises(StructuralError):
        en.msd_curve(en.box_spectrum(3), en.box_position_matrix(3), np.ones((2, 2)), [0.0, 1.0])


@pytest.fixture(scope="module")
def box_samples():
    spec = en.GibbsEnsembleSpec(en.box_spectrum(5), beta=0.05, e_max=80.0, n_modes=5, seed=12)
    return spec, en.gibbs_sample(spec, 8000)


def test_pair_reduced_msd_matches_direct_evolution(box_samples):
    spec, s = box_samples
    g = en.box_position_matrix(5)
    t = np.linspace(0.05, 1.0, 8)
    direct = en.msd_direct(s, spec.zeta, g, t)
    curve = en.msd_curve(spec.zeta, g, en.coefficient_moments(s), t).values
    assert np.all(np.abs(direct.mean - curve) <= 3 * direct.stderr + 1e-12)


def test_four_index_sum(box_samples):
    spec, s = box_samples
    g = en.box_position_matrix(5)
    t = np.array([0.0, 0.1, 0.4])
    out = en.msd_four_index(s, spec.zeta, g, t)
    assert np.all(out["diagonal_terms"] == 0)
    assert np.all(out["imag_residue"] < 1e-12)
    np.testing.assert_allclose(out["total"], out["direct_mean"], rtol=1e-9, atol=1e-15)
    assert out["total"][0] == pytest.approx(0.0, abs=1e-15)
    assert np.all(np.abs(out["difference"][1:]) <= 3 * out["difference_se"][1:])


# -- diffusive window ------------------------------------------------------


def test_window_on_ou_curve():
    gamma = 10.0
    t = np.logspace(-2, 2, 400)
    w = en.diffusive_window_detect(Trajectory(t, cp.ou_msd_analytic(gamma, t)))
    assert w.found and w.t_stop == pytest.approx(100.0)
    assert w.diffusion_constant == pytest.approx(1 / gamma ** 2, rel=0.02)
    assert w.slope == pytest.approx(1.0, abs=0.1)


def test_no_window_for_ballistic_curve():
    t = np.logspace(-2, 2, 200)
    w = en.diffusive_window_detect(Trajectory(t, t ** 2))
    assert not w.found and w.message == "none found"


def test_window_needs_enough_range():
    t = np.logspace(0, 2, 200)
    with pytest.raises(ValidationError):
        en.diffusive_window_detect(Trajectory(t, t))
