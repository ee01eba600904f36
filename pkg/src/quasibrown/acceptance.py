"""The acceptance suite: thirteen numbered checks with measured values and tolerances.

Each check returns a :class:`CriterionResult`; :func:`run_suite` runs a
selection (by number or module tag) and adds the whole-suite runtime check.
"""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import classical_processes as cp
from . import diagnostics as dg
from . import ensembles as en
from . import quantum_dynamics as qd
from . import signals
from . import spectra as sp

DEFAULT_SEED = 20260101
SUITE_LIMIT = 600.0


@dataclass
class CriterionResult:
    number: int
    name: str
    modules: tuple
    passed: bool
    measured: dict
    tolerance: dict
    runtime: float = 0.0
    runtime_limit: float = math.inf
    notes: str = ""

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"[{status}] criterion {self.number:2d} {self.name} ({self.runtime:.1f}s / {self.runtime_limit:.0f}s)"

    def to_dict(self) -> dict:
        return {"number": self.number, "name": self.name, "modules": list(self.modules),
                "passed": self.passed, "measured": self.measured, "tolerance": self.tolerance,
                "runtime": self.runtime, "runtime_limit": self.runtime_limit, "notes": self.notes}


@dataclass
class _Spec:
    number: int
    name: str
    modules: tuple
    limit: float
    func: object = field(repr=False)


_REGISTRY: list[_Spec] = []


def _criterion(number, name, modules, limit):
    def deco(func):
        _REGISTRY.append(_Spec(number, name, tuple(modules), limit, func))
        return func
    return deco


def _z(mean, se):
    return np.abs(np.asarray(mean)) / np.asarray(se)


# --------------------------------------------------------------------------


@_criterion(1, "wiener-variance-identity", ("classical_processes",), 30)
def wiener_variance(seed: int = DEFAULT_SEED, n_draws: int = 10_000, n_terms: int = 1000):
    t = np.array([0.25, 0.5, 0.75])
    w = cp.series_ensemble(cp.wiener_complex_basis(n_terms, t), n_draws, seed)
    sq = np.abs(w) ** 2
    mean, se = sq.mean(axis=0), sq.std(axis=0, ddof=1) / math.sqrt(n_draws)
    z_t = (mean - t) / se
    z_derived = (mean - (t + t ** 2 / 2)) / se
    w2 = cp.series_ensemble(cp.wiener_two_sided_basis(n_terms, t), n_draws, seed)
    sq2 = np.abs(w2) ** 2
    z_two = (sq2.mean(axis=0) - t) / (sq2.std(axis=0, ddof=1) / math.sqrt(n_draws))
    passed = bool(np.all(np.abs(z_t) <= 3))
    return passed, {"t": t, "mean_abs_sq": mean, "stderr": se, "z_vs_t": z_t,
                    "z_vs_t_plus_half_t2": z_derived, "two_sided_z_vs_t": z_two}, \
        {"z_max": 3.0}, "one-sided complex series has E|w|^2 = t + t^2/2; two-sided form gives t"


@_criterion(2, "figure1-reproduction", ("classical_processes", "cli"), 60)
def figure1(seed: int = DEFAULT_SEED, n_draws: int = 10_000):
    t = np.linspace(0.0, 1.0, cp.FIG1_GRID)
    curves = [cp.ou_series_sample(cp.OUParams(cp.FIG1_GAMMA, cp.FIG1_TERMS, s),
                                  cp.draw_coefficients(cp.FIG1_TERMS, s), t) for s in range(1, 6)]
    starts = [c.values[0] for c in curves]
    basis = cp.ou_basis(cp.FIG1_GAMMA, cp.FIG1_TERMS, t)
    ens = cp.series_ensemble(basis, n_draws, seed)
    var_mc = np.mean(ens ** 2, axis=0)
    var_cf = cp.ou_series_variance(cp.FIG1_GAMMA, cp.FIG1_TERMS, t)
    rel = np.abs(var_mc[1:] / var_cf[1:] - 1.0)
    passed = len(curves) == 5 and all(s == 0.0 for s in starts) and rel.max() < 0.05
    return passed, {"n_curves": len(curves), "starts": starts, "max_relative_deviation": rel.max(),
                    "reversals": [cp.count_direction_reversals(c.values) for c in curves]}, \
        {"relative": 0.05}, ""


@_criterion(3, "ou-msd-closed-form", ("classical_processes",), 60)
def ou_msd(seed: int = DEFAULT_SEED, n_paths: int = 10_000, gamma: float = 10.0):
    t = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
    tab = cp.msd_table(gamma, t, n_paths, seed)
    z = (tab["msd_exact_mc"] - tab["msd_analytic"]) / tab["stderr"]
    ratio = float(cp.ou_msd_analytic(1.0, 1e-3) / 1e-9)
    small_rel = abs(ratio * 3.0 - 1.0)
    passed = bool(np.all(np.abs(z) <= 3)) and small_rel < 0.005
    return passed, {"t": t, "z": z, "msd_over_t3": ratio, "small_t_relative": small_rel}, \
        {"z_max": 3.0, "small_t_relative": 0.005}, ""


@_criterion(4, "domain-monotonicity-sandwich", ("spectra",), 120)
def sandwich(seed: int = DEFAULT_SEED, n: int = 32, m: float = 1.0, M: float = 4.0):
    grid = sp.TriangleGrid(m, M, 0.5, 1.0, n)
    tri = sp.triangle_dirichlet_eigs(grid, 5, refinements=2).eigenvalues
    geom = grid.geometry()
    cutoff = 1.0
    while True:
        try:
            imm = sp.immersed_rectangle_spectrum(geom, cutoff).eigenvalues
            if imm.size >= 5:
                break
        except sp.SpectrumError:
            pass
        cutoff *= 2
    imm = imm[:5]
    sur = sp.surrounding_rectangle_spectrum(geom, imm[-1] / 8.0).eigenvalues[:5]
    ratio = imm / sur
    ratio_err = np.abs(ratio - 9.0) / 9.0
    iso = sp.triangle_dirichlet_eigs(sp.TriangleGrid.isoceles(1.0, n), 1, refinements=2).eigenvalues[0]
    iso_rel = abs(iso / (5 * np.pi ** 2) - 1.0)
    ordered = bool(np.all(sur <= tri) and np.all(tri <= imm))
    passed = ordered and bool(np.all(ratio_err <= 1e-14)) and iso_rel < 0.005
    return passed, {"surrounding": sur, "triangle": tri, "immersed": imm, "ratio": ratio,
                    "isoceles_lowest": iso, "isoceles_relative": iso_rel}, \
        {"ratio_relative": 1e-14, "isoceles_relative": 0.005}, ""


@_criterion(5, "divergence-demonstration", ("spectra", "signals"), 30)
def divergence(seed: int = DEFAULT_SEED):
    one = sp.inverse_eigenvalue_sum(dims=1, budget=10_000)
    basel_err = abs(one.partial_sums[-1] - np.pi ** 2 / 6)
    two = sp.inverse_eigenvalue_sum(dims=2, budget=10 ** 6)
    passed = basel_err < 1e-3 and two.fit["b"] > 0 and two.fit["r2"] > 0.999
    return passed, {"basel_error": basel_err, "b": two.fit["b"], "r2": two.fit["r2"],
                    "verdict_N2": two.verdict}, {"basel": 1e-3, "r2": 0.999}, ""


def _gibbs_system(seed, n_samples, n_modes=8, n_chains=64):
    spec = en.GibbsEnsembleSpec(en.box_spectrum(n_modes), beta=0.02, e_max=120.0,
                                n_modes=n_modes, seed=seed, n_chains=n_chains)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", en.SamplingQualityWarning)
        return spec, en.gibbs_sample(spec, n_samples)


@_criterion(6, "gibbs-moments", ("ensembles",), 120)
def gibbs_moments(seed: int = DEFAULT_SEED, n_samples: int = 480_000):
    spec, s = _gibbs_system(seed, n_samples)
    m = en.coefficient_moments(s)
    off = ~np.eye(spec.n_modes, dtype=bool)
    z_cross = _z(m.cross, m.cross_se)[off].max()
    z_noconj = _z(m.noconj, m.noconj_se).max()
    c = s.c
    norm_dev = float(np.max(np.abs(np.sum(np.abs(c) ** 2, axis=1) - 1.0)))
    e_top = float(np.max(c.real ** 2 @ spec.zeta + c.imag ** 2 @ spec.zeta))
    passed = (z_cross < 4 and z_noconj < 4 and norm_dev <= 1e-12 and e_top < spec.e_max
              and s.ess >= 10_000)
    return passed, {"z_cross_max": z_cross, "z_noconj_max": z_noconj, "norm_deviation": norm_dev,
                    "max_energy": e_top, "e_max": spec.e_max, "ess": s.ess, "n_samples": len(s)}, \
        {"z_max": 4.0, "norm": 1e-12, "ess_min": 10_000}, ""


@_criterion(7, "msd-pairing-reduction", ("ensembles",), 120)
def msd_pairing(seed: int = DEFAULT_SEED, n_samples: int = 20_000):
    spec, s = _gibbs_system(seed + 1, n_samples)
    g = en.box_position_matrix(spec.n_modes)
    t = np.array([0.002, 0.005, 0.01, 0.02, 0.05, 0.1])
    four = en.msd_four_index(s, spec.zeta, g, t)
    z = _z(four["difference"], four["difference_se"])
    m = en.coefficient_moments(s)
    at0 = en.msd_curve(spec.zeta, g, m, [0.0]).values[0]
    ts = np.geomspace(1e-4, 1e-3, 20) / spec.zeta[-1]
    short = en.msd_curve(spec.zeta, g, m, ts)
    slope = np.polyfit(np.log(ts), np.log(short.values), 1)[0]
    passed = bool(np.all(z <= 3)) and at0 == 0.0 and abs(slope - 2.0) <= 0.05
    return passed, {"z": z, "diagonal_terms_max": four["diagonal_terms"].max(), "msd_at_0": at0,
                    "short_time_slope": slope}, {"z_max": 3.0, "slope": "2.00 +- 0.05"}, ""


@_criterion(8, "matrix-element-identity", ("diagnostics", "ensembles"), 30)
def matrix_identity(seed: int = DEFAULT_SEED, n_modes: int = 8):
    z = en.box_spectrum(n_modes).eigenvalues
    g = en.box_position_matrix(n_modes)
    b_gap = dg.build_B_matrix(g, z)
    b_quad = dg.build_B_matrix(None, None, en.box_derivative_overlaps(n_modes))
    err = float(np.max(np.abs(b_gap - b_quad)))
    bound = dg.bound_constant(z[-1])
    top = float(np.max(np.abs(b_quad)))
    passed = err <= 1e-8 and top <= bound
    return passed, {"max_abs_difference": err, "max_abs_B": top, "bound_constant": bound}, \
        {"abs": 1e-8}, ""


@_criterion(9, "cauchy-schwarz-chain", ("diagnostics",), 60)
def chain(seed: int = DEFAULT_SEED, n_samples: int = 100):
    spec, s = _gibbs_system(seed + 2, n_samples, n_chains=4)
    g = en.box_position_matrix(spec.n_modes)
    res = dg.cauchy_schwarz_chain(s, g, spec.zeta, spec.e_max)
    return res["holds"] and len(res["lhs"]) == n_samples, \
        {"n_samples": len(res["lhs"]), "max_lhs_over_rhs": float(np.max(res["lhs"] / res["rhs"]))}, \
        {"every_sample": True}, ""


@_criterion(10, "observable-round-trip", ("diagnostics", "quantum_dynamics", "signals"), 30)
def round_trip(seed: int = DEFAULT_SEED, trials: int = 20):
    t = np.linspace(0.0, 5.0, 257)
    errs = []
    for trial in range(trials):
        n = 4 + trial % 13
        system = qd.random_mode_system(n, seed + trial)
        psi = qd.random_state(n, seed + trial)
        ev, V = np.linalg.eigh(system.H)
        c = V.conj().T @ psi
        sig = dg.observable_series_extract([c], V.conj().T @ system.X @ V, ev - ev.min() + 1.0)[0]
        direct = qd.observable_trajectory(qd.evolve_linear(system, psi, t), system.X, t).values
        errs.append(float(np.max(np.abs(signals.evaluate_qp(sig, t).values - direct))))
    return max(errs) <= 1e-9, {"max_abs_error": max(errs)}, {"abs": 1e-9}, ""


@_criterion(11, "zeno-exponent", ("quantum_dynamics",), 30)
def zeno(seed: int = DEFAULT_SEED, systems: int = 5):
    ps, mono = [], []
    for k in range(systems):
        system = qd.random_mode_system(6, seed + k, 3)
        psi = qd.random_state(6, seed + k, system.projectors["D"])
        rep = qd.zeno_survival(system, psi, "D", total_time=1.0)
        ps.append(rep.exponent)
        mono.append(rep.monotone)
    passed = all(abs(p - 2.0) <= 0.1 for p in ps) and all(mono)
    return passed, {"exponents": ps, "monotone": mono}, {"exponent": "2.00 +- 0.10"}, ""


@_criterion(12, "wfe-integrator", ("quantum_dynamics",), 60)
def wfe(seed: int = DEFAULT_SEED):
    system = qd.random_mode_system(8, seed)
    psi = qd.random_state(8, seed + 1)
    params = qd.WFEParams(0.5, 1, "S")
    dt = 0.01 / qd.stability_number(system, params, 1.0)
    lin_run = qd.evolve_wfe(system, qd.WFEParams(0.0, 1, "S"), psi, dt, 1000)
    lin_err = float(np.max(np.abs(lin_run.states - qd.evolve_linear(system, psi, lin_run.times))))
    run = qd.evolve_wfe(system, params, psi, dt, 1000)
    ladder = qd.ladder_system()
    psi_l = qd.random_state(ladder.n, seed + 2, ladder.projectors["low"])
    vel = {op: qd.initial_velocity_check(ladder, qd.WFEParams(1.0, 1, op), psi_l).max_deviation
           for op in ("S", "X", "P")}
    passed = (lin_err <= 1e-8 and run.norm_drift <= 1e-8 and run.energy_drift <= 1e-6
              and max(vel.values()) <= 1e-6)
    return passed, {"linear_max_error": lin_err, "norm_drift": run.norm_drift,
                    "energy_drift": run.energy_drift, "velocity_deviation": vel}, \
        {"linear": 1e-8, "norm": 1e-8, "energy": 1e-6, "velocity": 1e-6}, ""


CRITERIA = {s.number: s for s in sorted(_REGISTRY, key=lambda s: s.number)}
MODULES = ("signals", "classical_processes", "spectra", "ensembles", "quantum_dynamics",
           "diagnostics", "cli")


def run_criterion(number: int, seed: int = DEFAULT_SEED) -> CriterionResult:
    spec = CRITERIA[number]
    t0 = time.perf_counter()
    passed, measured, tol, notes = spec.func(seed)
    dt = time.perf_counter() - t0
    return CriterionResult(number, spec.name, spec.modules, bool(passed and dt < spec.limit),
                           measured, tol, dt, spec.limit, notes)


def select(only=None) -> list[int]:
    """Criterion numbers matching ``only`` (numbers or module names); all when empty."""
    if not only:
        return list(CRITERIA)
    picked = set()
    for item in only:
        item = str(item).strip()
        if item.isdigit():
            if int(item) not in CRITERIA and int(item) != 13:
                raise ValueError(f"no criterion {item}")
            picked.add(int(item))
        elif item in MODULES:
            picked.update(n for n, s in CRITERIA.items() if item in s.modules)
            if item == "cli":
                picked.add(13)
        else:
            raise ValueError(f"unknown criterion or module {item!r}")
    return sorted(picked)


def run_suite(only=None, seed: int = DEFAULT_SEED, echo=None) -> list[CriterionResult]:
    """Run the selected criteria; the full run appends the whole-suite check (13)."""
    numbers = select(only)
    t0 = time.perf_counter()
    results = []
    for n in numbers:
        if n == 13:
            continue
        r = run_criterion(n, seed)
        results.append(r)
        if echo:
            echo(r.line())
    if not only or 13 in numbers:
        total = time.perf_counter() - t0
        others = [r for r in results]
        ok = total < SUITE_LIMIT and all(r.passed for r in others) and len(others) == len(CRITERIA)
        r = CriterionResult(13, "full-suite", ("cli",), ok,
                            {"total_runtime": total, "failed": [x.number for x in others if not x.passed]},
                            {"runtime": SUITE_LIMIT, "exit_status": 0}, total, SUITE_LIMIT)
        results.append(r)
        if echo:
            echo(r.line())
    return results
