import math

import numpy as np
import pytest
from scipy.linalg import expm

from quasibrown import quantum_dynamics as qd
from quasibrown.exceptions import StepSizeError, StructuralError, ValidationError


@pytest.fixture
def system():
    return qd.random_mode_system(6, seed=3, domain_size=3)


# -- linear evolution ------------------------------------------------------


def test_eigenstate_is_stationary(system):
    ev, V = np.linalg.eigh(system.H)
    t = np.linspace(0, 10, 21)
    states = qd.evolve_linear(system, V[:, 2], t)
    x = qd.observable_trajectory(states, system.X, t).values
    np.testing.assert_allclose(x, x[0], atol=1e-13)
    np.testing.assert_allclose(states[-1], np.exp(-1j * ev[2] * 10) * V[:, 2], atol=1e-12)


def test_norm_preserved(system):
    t = np.linspace(0, 50, 101)
    states = qd.evolve_linear(system, qd.random_state(6, 1), t)
    np.testing.assert_allclose(np.linalg.norm(states, axis=1), 1.0, atol=1e-12)


def test_linear_matches_matrix_exponential(system):
    psi = qd.random_state(6, 2)
    states = qd.evolve_linear(system, psi, [0.0, 1.3])
    np.testing.assert_allclose(states[1], expm(-1j * system.H * 1.3) @ psi, atol=1e-12)


def test_observable_double_sum(system):
    """<X>(t) = sum_jk c_j* c_k g_jk e^{i(w_j - w_k)t} in the energy basis."""
    psi = qd.random_state(6, 4)
    ev, V = np.linalg.eigh(system.H)
    c = V.conj().T @ psi
    g = V.conj().T @ system.X @ V
    t = np.linspace(0, 4, 17)
    want = [sum(np.conj(c[j]) * c[k] * g[j, k] * np.exp(1j * (ev[j] - ev[k]) * ti)
                for j in range(6) for k in range(6)).real for ti in t]
    got = qd.observable_trajectory(qd.evolve_linear(system, psi, t), system.X, t).values
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_state_validation(system):
    with pytest.raises(ValidationError):
        qd.evolve_linear(system, np.ones(6), [0.0, 1.0])
    with pytest.raises(StructuralError):
        qd.evolve_linear(system, np.ones(5) / math.sqrt(5), [0.0, 1.0])


def test_mode_system_validation():
    with pytest.raises(ValidationError):
        qd.ModeSystem(np.array([[0, 1], [0, 0]]), np.eye(2))
    with pytest.raises(StructuralError):
        qd.ModeSystem(np.eye(2), np.eye(3))
    with pytest.raises(ValidationError):
        qd.ModeSystem(np.eye(2), np.eye(2), projectors={"bad": 2 * np.eye(2)})


def test_json_round_trip():
    s = qd.ladder_system(3, 3)
    back = qd.ModeSystem.from_json(s.to_json())
    for name in ("H", "X", "S", "P"):
        np.testing.assert_array_equal(getattr(back, name), getattr(s, name))
    np.testing.assert_array_equal(back.projectors["low"], s.projectors["low"])
    assert back.M == s.M and back.m_hat == s.m_hat


def test_json_rejects_unknown_keys():
    doc = qd.random_mode_system(2).to_json()[:-1] + ', "extra": 1}'
    with pytest.raises(ValidationError):
        qd.ModeSystem.from_json(doc)


# -- dispersion ------------------------------------------------------------


def test_dispersion_cases():
    X = np.diag([1.0, -1.0])
    assert qd.compute_dispersion([1, 0], X) == 0.0
    assert qd.compute_dispersion(np.array([1, 1]) / math.sqrt(2), X) == pytest.approx(1.0)
    psi = np.array([math.cos(0.3), math.sin(0.3)])
    assert qd.compute_dispersion(psi, X) == pytest.approx(1 - math.cos(0.6) ** 2)


# -- Zeno ------------------------------------------------------------------


def test_zeno_exponent_is_two(system):
    psi = qd.random_state(6, 5, system.projectors["D"])
    rep = qd.zeno_survival(system, psi, "D")
    assert rep.exponent == pytest.approx(2.0, abs=0.05)
    assert rep.monotone


@pytest.mark.parametrize("n", [4, 8, 12, 16])
def test_zeno_exponent_across_sizes(n):
    s = qd.random_mode_system(n, seed=n)
    psi = qd.random_state(n, n, s.projectors["D"])
    assert 1.9 <= qd.zeno_survival(s, psi, "D").exponent <= 2.1


def test_zeno_prefactor_is_energy_variance_leak(system):
    # 1 - s(dt) ~ dt^2 <psi|H Q H|psi> for small dt
    psi = qd.random_state(6, 6, system.projectors["D"])
    Q = system.projectors["D'"]
    want = np.vdot(system.H @ psi, Q @ (system.H @ psi)).real
    rep = qd.zeno_survival(system, psi, "D")
    assert rep.prefactor == pytest.approx(want, rel=0.02)


def test_no_leak_when_domain_is_invariant():
    H = np.zeros((4, 4))
    H[:2, :2] = [[1.0, 0.5], [0.5, -1.0]]
    H[2:, 2:] = [[0.3, 0.2], [0.2, 0.1]]
    P = np.diag([1.0, 1.0, 0.0, 0.0])
    s = qd.ModeSystem(H, np.eye(4), projectors={"D": P})
    rep = qd.zeno_survival(s, np.array([0.6, 0.8, 0, 0]), "D")
    assert np.all(rep.deficit < 1e-28)
    np.testing.assert_allclose(rep.peek_survival, 1.0, atol=1e-14)


def test_peek_survival_against_expm(system):
    psi = qd.random_state(6, 7, system.projectors["D"])
    P = system.projectors["D"]
    rep = qd.zeno_survival(system, psi, "D", n_peeks=(1, 3, 9), total_time=2.0)
    for n, got in zip(rep.n_peeks, rep.peek_survival):
        step = P @ expm(-1j * system.H * 2.0 / n)
        v = np.linalg.matrix_power(step, n) @ psi
        assert got == pytest.approx(np.vdot(v, v).real, rel=1e-10)


def test_zeno_requires_state_in_domain(system):
    with pytest.raises(ValidationError):
        qd.zeno_survival(system, qd.random_state(6, 1), "D")
    with pytest.raises(ValidationError):
        qd.zeno_survival(system, qd.random_state(6, 1, system.projectors["D"]), "nowhere")


# -- WFE -------------------------------------------------------------------


def test_zero_strength_matches_linear(system):
    psi = qd.random_state(6, 8)
    p = qd.WFEParams(0.0)
    dt = 0.01 / qd.stability_number(system, p, 1.0)
    run = qd.evolve_wfe(system, p, psi, dt, 500)
    np.testing.assert_allclose(run.states, qd.evolve_linear(system, psi, run.times), atol=1e-10)


@pytest.mark.parametrize("op", ["S", "X"])
def test_norm_and_energy_conserved(system, op):
    psi = qd.random_state(6, 9)
    p = qd.WFEParams(0.7, 2, op)
    dt = 0.01 / qd.stability_number(system, p, 1.0)
    run = qd.evolve_wfe(system, p, psi, dt, 1000)
    assert run.norm_drift <= 1e-8 and run.energy_drift <= 1e-6


def test_fourth_order_convergence(system):
    psi = qd.random_state(6, 10)
    p = qd.WFEParams(0.5)
    T = 2.0
    dt0 = 0.05 / qd.stability_number(system, p, 1.0)
    n0 = int(math.ceil(T / dt0))

    def final(n):
        return qd.evolve_wfe(system, p, psi, T / n, n).states[-1]

    ref = final(16 * n0)
    e1 = np.linalg.norm(final(n0) - ref)
    e2 = np.linalg.norm(final(2 * n0) - ref)
    assert math.log2(e1 / e2) == pytest.approx(4.0, abs=0.3)


def test_step_size_precondition(system):
    p = qd.WFEParams(1.0)
    dt = 0.2 / qd.stability_number(system, p, 1.0)
    with pytest.raises(ValidationError):
        qd.evolve_wfe(system, p, qd.random_state(6, 0), dt, 10)


def test_norm_drift_raises(system, monkeypatch):
    monkeypatch.setattr(qd, "NORM_DRIFT_LIMIT", 1e-30)
    p = qd.WFEParams(1.0)
    dt = 0.05 / qd.stability_number(system, p, 1.0)
    with pytest.raises(StepSizeError):
        qd.evolve_wfe(system, p, qd.random_state(6, 0), dt, 200)


def test_wfe_params_validation():
    with pytest.raises(ValidationError):
        qd.WFEParams(-1.0)
    with pytest.raises(ValidationError):
        qd.WFEParams(1.0, 0)
    with pytest.raises(ValidationError):
        qd.WFEParams(1.0, 1, "Q")
    assert qd.WFEParams(0.5, 3).strength == 4.5


def test_missing_operator(system):
    with pytest.raises(ValidationError):
        system.operator("P")


# -- velocity and commutators ----------------------------------------------


@pytest.mark.parametrize("op", ["S", "X", "P"])
def test_wfe_leaves_initial_velocity_unchanged(op):
    lad = qd.ladder_system()
    psi = qd.random_state(lad.n, 11, lad.projectors["low"])
    rep = qd.initial_velocity_check(lad, qd.WFEParams(1.0, 1, op), psi)
    assert rep.max_deviation <= 1e-6
    assert abs(rep.wfe_commutator) < 1e-10
    assert rep.fd_linear == pytest.approx(rep.analytic, abs=1e-8)


def test_momentum_commutator_identity_on_low_block():
    lad = qd.ladder_system()
    psi = qd.random_state(lad.n, 12, lad.projectors["low"])
    P, X, L = lad.P, lad.X, lad.projectors["low"]
    mean = np.vdot(psi, P @ psi).real
    K = P @ P - 2 * mean * P
    lhs = K @ X - X @ K
    rhs = 2 * lad.M * (lad.hbar / 1j) * (P - mean * np.eye(lad.n))
    assert np.max(np.abs(L @ (lhs - rhs) @ L)) < 1e-10
    # the identity fails on the truncated top levels
    assert np.max(np.abs(lhs - rhs)) > 1e-3


def test_real_lattice_has_zero_velocity():
    lat = qd.lattice_system(12)
    psi = np.zeros(12)
    psi[3:7] = 0.5
    rep = qd.initial_velocity_check(lat, qd.WFEParams(1.0, 1, "X"), psi)
    assert abs(rep.analytic) < 1e-14 and abs(rep.fd_wfe) < 1e-10


# -- cat indicator ---------------------------------------------------------


def test_cat_indicator_cases():
    lat = qd.lattice_system(8)
    L, R = lat.projectors["left"], lat.projectors["right"]
    cat = np.zeros(8)
    cat[[1, 6]] = 1 / math.sqrt(2)
    rep = qd.cat_indicator(cat, L, R, lat.X)
    assert rep.cat_like and rep.between and rep.weight_1 == pytest.approx(0.5)
    local = np.zeros(8)
    local[1] = 1.0
    assert not qd.cat_indicator(local, L, R).cat_like
    lopsided = np.zeros(8)
    lopsided[[1, 6]] = [math.sqrt(0.9), math.sqrt(0.1)]
    assert not qd.cat_indicator(lopsided, L, R).cat_like


def test_cat_indicator_needs_orthogonal_domains():
    with pytest.raises(ValidationError):
        qd.cat_indicator([1, 0], np.eye(2), np.eye(2))
