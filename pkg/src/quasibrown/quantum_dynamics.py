"""Finite-mode quantum evolution: linear propagation, Zeno peeks, and the WFE flow.

Everything is a dense matrix in a mode basis.  Time evolution follows
``i hbar d psi/dt = H psi``, i.e. ``psi(t) = exp(-i H t / hbar) psi(0)``.
The wavefunction-energy (WFE) flow adds ``w N^2 D(psi)`` to the energy
functional, where ``D = <Op^2> - <Op>^2`` is the dispersion of a chosen
operator (centre of mass ``S``, observed ``X`` or momentum ``P``).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from ._validation import as_time_grid, check_hermitian, check_normalized
from .exceptions import StepSizeError, StructuralError, ValidationError
from .signals import Trajectory

NORM_DRIFT_LIMIT = 1e-6
STABILITY_LIMIT = 0.1
ZENO_FIT_RANGE = (1e-3, 1e-2)


def spectral_radius(m: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvalsh(m)))) if m.size else 0.0


@dataclass
class ModeSystem:
    H: np.ndarray
    X: np.ndarray
    S: np.ndarray | None = None
    P: np.ndarray | None = None
    projectors: dict = field(default_factory=dict)
    hbar: float = 1.0
    M: float = 1.0           # heavy mass, enters [P, X] = -i hbar M
    m_hat: float | None = None
    M_hat: float | None = None

    def __post_init__(self):
        self.H = check_hermitian(np.asarray(self.H, dtype=complex), "H")
        n = self.H.shape[0]
        self.X = check_hermitian(np.asarray(self.X, dtype=complex), "X")
        if self.S is None:
            self.S = self.X.copy()
        self.S = check_hermitian(np.asarray(self.S, dtype=complex), "S")
        if self.P is not None:
            self.P = check_hermitian(np.asarray(self.P, dtype=complex), "P")
        for name, mat in [("X", self.X), ("S", self.S)] + ([("P", self.P)] if self.P is not None else []):
            if mat.shape != (n, n):
                raise StructuralError(f"{name} has shape {mat.shape}, expected {(n, n)}")
        checked = {}
        for key, p in self.projectors.items():
            p = check_hermitian(np.asarray(p, dtype=complex), f"projector {key!r}", atol=1e-10)
            if p.shape != (n, n):
                raise StructuralError(f"projector {key!r} has wrong shape")
            if np.max(np.abs(p @ p - p)) > 1e-10:
                raise ValidationError(f"projector {key!r} is not idempotent")
            checked[key] = p
        self.projectors = checked

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def operator(self, name: str) -> np.ndarray:
        op = {"S": self.S, "X": self.X, "P": self.P}.get(name)
        if op is None:
            raise ValidationError(f"operator {name!r} not available")
        return op

    # JSON: dense matrices, row-major, real and imaginary parts as nested lists
    def to_json(self) -> str:
        def enc(m):
            return None if m is None else {"re": np.real(m).tolist(), "im": np.imag(m).tolist()}
        doc = {"H": enc(self.H), "X": enc(self.X), "S": enc(self.S), "P": enc(self.P),
               "projectors": {k: enc(v) for k, v in self.projectors.items()},
               "hbar": self.hbar, "M": self.M, "m_hat": self.m_hat, "M_hat": self.M_hat}
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "ModeSystem":
        doc = json.loads(text)
        unknown = set(doc) - {"H", "X", "S", "P", "projectors", "hbar", "M", "m_hat", "M_hat"}
        if unknown:
            raise ValidationError(f"unknown keys in system description: {sorted(unknown)}")

        def dec(d):
            if d is None:
                return None
            if isinstance(d, dict):
                return np.asarray(d["re"], dtype=float) + 1j * np.asarray(d.get("im", 0.0), dtype=float)
            return np.asarray(d, dtype=complex)
        return cls(dec(doc["H"]), dec(doc["X"]), dec(doc.get("S")), dec(doc.get("P")),
                   {k: dec(v) for k, v in doc.get("projectors", {}).items()},
                   doc.get("hbar", 1.0), doc.get("M", 1.0), doc.get("m_hat"), doc.get("M_hat"))


@dataclass(frozen=True)
class WFEParams:
    w: float
    N: int = 1
    operator: str = "S"  # "S" | "X" | "P"

    def __post_init__(self):
        if not self.w >= 0:
            raise ValidationError("w must be >= 0")
        if self.N < 1:
            raise ValidationError("N must be >= 1")
        if self.operator not in ("S", "X", "P"):
            raise ValidationError("operator must be one of 'S', 'X', 'P'")

    @property
    def strength(self) -> float:
        return self.w * self.N ** 2


# --------------------------------------------------------------------------
# linear evolution


def evolve_linear(system: ModeSystem, psi0, times) -> np.ndarray:
    """States ``exp(-i H t / hbar) psi0`` on the grid, shape ``(len(times), n)``."""
    psi0 = check_normalized(psi0)
    if psi0.size != system.n:
        raise StructuralError("psi0 dimension does not match H")
    t = as_time_grid(times)
    evals, evecs = np.linalg.eigh(system.H)
    c = evecs.conj().T @ psi0
    phases = np.exp(-1j * np.outer(t, evals) / system.hbar)
    return (phases * c) @ evecs.T


def observable_trajectory(states, op, times, meta: dict | None = None) -> Trajectory:
    """``<psi(t)|Op|psi(t)>`` for each row of ``states``."""
    op = check_hermitian(np.asarray(op, dtype=complex), "operator", atol=1e-10)
    states = np.atleast_2d(np.asarray(states, dtype=complex))
    if states.shape[1] != op.shape[0]:
        raise StructuralError("state and operator dimensions differ")
    vals = np.einsum("ti,ij,tj->t", states.conj(), op, states)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.max(np.abs(vals.imag)) > 1e-10 * scale:
        raise ValidationError("expectation value has an imaginary residue above 1e-10")
    info = {"generator": "observable_trajectory"}
    info.update(meta or {})
    return Trajectory(times, vals.real, info)


def compute_dispersion(psi, op) -> float:
    """``<psi|Op^2|psi> - <psi|Op|psi>^2``, clipped at 0 against rounding."""
    psi = check_normalized(psi)
    op = np.asarray(op, dtype=complex)
    v = op @ psi
    mean = np.vdot(psi, v).real
    return max(float(np.vdot(v, v).real - mean ** 2), 0.0)


# --------------------------------------------------------------------------
# Zeno experiment


@dataclass
class ZenoReport:
    delta_t: np.ndarray
    deficit: np.ndarray        # 1 - s(delta_t)
    exponent: float
    prefactor: float
    total_time: float
    n_peeks: np.ndarray
    peek_survival: np.ndarray

    @property
    def monotone(self) -> bool:
        return bool(np.all(np.diff(self.peek_survival) > 0))


def _propagator(H, dt, hbar=1.0):
    evals, evecs = np.linalg.eigh(H)
    return (evecs * np.exp(-1j * evals * dt / hbar)) @ evecs.conj().T


def zeno_survival(system: ModeSystem, psi0, domain: str, delta_t=None,
                  n_peeks=(1, 10, 100), total_time: float | None = None) -> ZenoReport:
    """Single-interval survival deficit and the n-peek collapse sequence.

    ``1 - s(dt) = ||(1 - P_D) U(dt) psi0||^2`` is fitted to ``c dt^p`` over
    ``dt`` in ``[1e-3, 1e-2] / rho(H)`` by default.  The n-peek protocol
    projects onto the domain and renormalizes after each of ``n`` equal
    intervals of ``total_time``; the product of the kept weights is reported.
    """
    psi0 = check_normalized(psi0)
    P = system.projectors.get(domain)
    if P is None:
        raise ValidationError(f"unknown domain {domain!r}")
    if np.linalg.norm(P @ psi0 - psi0) > 1e-10:
        raise ValidationError("psi0 must lie in the domain (P_D psi0 = psi0)")
    rho = spectral_radius(system.H) or 1.0
    if delta_t is None:
        delta_t = np.geomspace(*ZENO_FIT_RANGE, 11) / rho
    delta_t = np.asarray(delta_t, dtype=float)
    Q = np.eye(system.n) - P
    deficit = np.array([np.linalg.norm(Q @ (_propagator(system.H, dt, system.hbar) @ psi0)) ** 2
                        for dt in delta_t])
    pos = deficit > 0
    if pos.sum() >= 2:
        p, logc = np.polyfit(np.log(delta_t[pos]), np.log(deficit[pos]), 1)
    else:
        p, logc = np.inf, -np.inf
    T = total_time if total_time is not None else 1.0 / rho
    n_peeks = np.asarray(n_peeks, dtype=int)
    surv = []
    for n in n_peeks:
        U = _propagator(system.H, T / n, system.hbar)
        psi = psi0.copy()
        keep = 1.0
        for _ in range(n):
            psi = P @ (U @ psi)
            wgt = np.vdot(psi, psi).real
            keep *= wgt
            if wgt == 0:
                break
            psi /= np.sqrt(wgt)
        surv.append(keep)
    return ZenoReport(delta_t, deficit, float(p), float(np.exp(logc)), T, n_peeks, np.array(surv))


# --------------------------------------------------------------------------
# WFE flow


def _wfe_rhs(H, op, op2, strength, hbar):
    def f(psi):
        opsi = op @ psi
        mean = np.vdot(psi, opsi).real
        return (-1j / hbar) * (H @ psi + strength * (op2 @ psi - 2.0 * mean * opsi))
    return f


def _rk4_step(f, psi, dt):
    k1 = f(psi)
    k2 = f(psi + 0.5 * dt * k1)
    k3 = f(psi + 0.5 * dt * k2)
    k4 = f(psi + dt * k3)
    return psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def wfe_energy(system: ModeSystem, params: WFEParams, psi) -> float:
    """``<H> + w N^2 (<Op^2> - <Op>^2)`` with unnormalized brackets."""
    op = system.operator(params.operator)
    opsi = op @ psi
    return float(np.vdot(psi, system.H @ psi).real
                 + params.strength * (np.vdot(opsi, opsi).real - np.vdot(psi, opsi).real ** 2))


def stability_number(system: ModeSystem, params: WFEParams, dt: float) -> float:
    op = system.operator(params.operator)
    return abs(dt) * (spectral_radius(system.H) + params.strength * spectral_radius(op @ op)) / system.hbar


@dataclass
class WFERun:
    times: np.ndarray
    states: np.ndarray
    norm_drift: float
    energy_drift: float


def evolve_wfe(system: ModeSystem, params: WFEParams, psi0, dt: float, n_steps: int) -> WFERun:
    """Fixed-step RK4 for ``i hbar psi' = H psi + w N^2 (Op^2 psi - 2 <Op> Op psi)``.

    No renormalization: the flow conserves the norm, so its drift measures
    accuracy and a drift above 1e-6 raises :class:`StepSizeError`.
    """
    psi0 = check_normalized(psi0)
    if not dt > 0 or n_steps < 1:
        raise ValidationError("dt must be positive and n_steps >= 1")
    sn = stability_number(system, params, dt)
    if sn >= STABILITY_LIMIT:
        raise ValidationError(
            f"dt too large: dt*(rho(H) + wN^2 rho(Op^2)) = {sn:.3g} >= {STABILITY_LIMIT}")
    op = system.operator(params.operator)
    f = _wfe_rhs(system.H, op, op @ op, params.strength, system.hbar)
    states = np.empty((n_steps + 1, system.n), dtype=complex)
    states[0] = psi0
    psi = psi0
    for i in range(n_steps):
        psi = _rk4_step(f, psi, dt)
        states[i + 1] = psi
    norms = np.linalg.norm(states, axis=1)
    drift = float(np.max(np.abs(norms - 1.0)))
    if drift > NORM_DRIFT_LIMIT:
        raise StepSizeError(f"norm drift {drift:.3g} exceeds {NORM_DRIFT_LIMIT}; reduce dt", drift=drift)
    e0 = wfe_energy(system, params, psi0)
    e_drift = max(abs(wfe_energy(system, params, s) - e0) for s in states)
    return WFERun(dt * np.arange(n_steps + 1), states, drift, float(e_drift))


@dataclass
class VelocityReport:
    operator: str
    analytic: float            # (i/hbar) <[H, X]>
    fd_linear: float           # w = 0
    fd_wfe: float              # w > 0
    wfe_commutator: float      # (i/hbar) w N^2 <[Op^2 - 2<Op>Op, X]>

    @property
    def max_deviation(self) -> float:
        return max(abs(self.fd_wfe - self.fd_linear), abs(self.fd_wfe - self.analytic))


def initial_velocity_check(system: ModeSystem, params: WFEParams, psi0, h: float | None = None) -> VelocityReport:
    """``d<X>/dt`` at 0 by a symmetric difference stencil on single RK4 steps, with and without WFE."""
    psi0 = check_normalized(psi0)
    op = system.operator(params.operator)
    op2 = op @ op
    if h is None:
        h = 1e-3 / max(stability_number(system, params, 1.0), 1e-12)
    X = system.X

    def fd(strength):
        # fourth-order central stencil on single RK4 steps of +-h, +-2h
        f = _wfe_rhs(system.H, op, op2, strength, system.hbar)

        def x_at(step):
            p = _rk4_step(f, psi0, step)
            return np.vdot(p, X @ p).real
        return (8.0 * (x_at(h) - x_at(-h)) - (x_at(2 * h) - x_at(-2 * h))) / (12.0 * h)

    comm = system.H @ X - X @ system.H
    analytic = (1j / system.hbar * np.vdot(psi0, comm @ psi0)).real
    mean = np.vdot(psi0, op @ psi0).real
    K = op2 - 2.0 * mean * op
    wfe_c = (1j / system.hbar * params.strength * np.vdot(psi0, (K @ X - X @ K) @ psi0)).real
    return VelocityReport(params.operator, float(analytic), float(fd(0.0)), float(fd(params.strength)),
                          float(wfe_c))


@dataclass
class CatReport:
    weight_1: float
    weight_2: float
    mean_position: float | None
    between: bool | None
    cat_like: bool


def cat_indicator(psi, P1, P2, X=None, threshold: float = 0.25) -> CatReport:
    """Domain weights of ``psi``; cat-like when both exceed ``threshold``.

    With ``X`` given, the mean position must also sit strictly between the
    conditional means of the two domain components.
    """
    psi = check_normalized(psi)
    P1 = np.asarray(P1, dtype=complex)
    P2 = np.asarray(P2, dtype=complex)
    if np.max(np.abs(P1 @ P2)) > 1e-10:
        raise ValidationError("domain projectors must be mutually orthogonal")
    u, v = P1 @ psi, P2 @ psi
    w1, w2 = np.vdot(u, u).real, np.vdot(v, v).real
    both = w1 > threshold and w2 > threshold
    if X is None:
        return CatReport(float(w1), float(w2), None, None, bool(both))
    X = np.asarray(X, dtype=complex)
    mean = np.vdot(psi, X @ psi).real
    between = False
    if w1 > 0 and w2 > 0:
        x1 = np.vdot(u, X @ u).real / w1
        x2 = np.vdot(v, X @ v).real / w2
        between = min(x1, x2) < mean < max(x1, x2)
    return CatReport(float(w1), float(w2), float(mean), bool(between), bool(both and between))


# --------------------------------------------------------------------------
# system builders


def _random_hermitian(gen, n):
    a = gen.standard_normal((n, n)) + 1j * gen.standard_normal((n, n))
    return 0.5 * (a + a.conj().T)


def random_mode_system(n: int, seed: int = 0, domain_size: int | None = None) -> ModeSystem:
    """Random Hermitian ``H`` (unit spectral radius), ``X`` and ``S``.

    Domain ``"D"`` projects on the first ``domain_size`` basis vectors,
    ``"D'"`` on the rest.
    """
    if n < 2:
        raise ValidationError("n must be >= 2")
    gen = _rng.make_stream(seed, n, _rng.PURPOSE_SYSTEMS)
    H = _random_hermitian(gen, n)
    H /= spectral_radius(H)
    X = _random_hermitian(gen, n)
    S = _random_hermitian(gen, n)
    d = domain_size if domain_size is not None else n // 2
    P = np.diag((np.arange(n) < d).astype(float)).astype(complex)
    return ModeSystem(H, X, S, None, {"D": P, "D'": np.eye(n) - P})


def random_state(n: int, seed: int = 0, support=None) -> np.ndarray:
    gen = _rng.make_stream(seed, 10_000 + n, _rng.PURPOSE_SYSTEMS)
    v = gen.standard_normal(n) + 1j * gen.standard_normal(n)
    if support is not None:
        v = np.asarray(support, dtype=complex) @ v
    return v / np.linalg.norm(v)


def _ladder(levels: int, mass: float, omega: float, hbar: float):
    a = np.diag(np.sqrt(np.arange(1, levels)), 1)
    x = np.sqrt(hbar / (2 * mass * omega)) * (a + a.T)
    p = 1j * np.sqrt(hbar * mass * omega / 2) * (a.T - a)
    return x, p


def ladder_system(levels_light: int = 6, levels_heavy: int = 6, m: float = 1.0, M: float = 10.0,
                  omega: float = 1.0, coupling: float = 0.1, hbar: float = 1.0) -> ModeSystem:
    """Light and heavy particle in truncated oscillator bases, tensor ordered (light, heavy).

    ``H`` is diagonal oscillator energy plus ``coupling * x X``; ``S`` is the
    centre of mass and ``P = m p_x + M p_X``, so ``[P, X] = -i hbar M`` except
    on the top heavy level, where truncation breaks the canonical relation.
    """
    xl, pl = _ladder(levels_light, m, omega, hbar)
    xh, ph = _ladder(levels_heavy, M, omega, hbar)
    Il, Ih = np.eye(levels_light), np.eye(levels_heavy)
    x, X = np.kron(xl, Ih), np.kron(Il, xh)
    e = hbar * omega * (np.arange(levels_light)[:, None] + np.arange(levels_heavy)[None, :] + 1.0)
    H = np.diag(e.ravel()) + coupling * x @ X
    m_hat, M_hat = m / (m + M), M / (m + M)
    S = m_hat * x + M_hat * X
    P = m * np.kron(pl, Ih) + M * np.kron(Il, ph)
    low = np.kron(Il, np.diag((np.arange(levels_heavy) < levels_heavy - 2).astype(float)))
    return ModeSystem(H, X, S, P, {"low": low.astype(complex)}, hbar, M, m_hat, M_hat)


def lattice_system(sites: int = 16, hopping: float = 1.0, spacing: float = 1.0) -> ModeSystem:
    """Tight-binding chain; ``X`` is the site position, domains are the two halves."""
    H = -hopping * (np.eye(sites, k=1) + np.eye(sites, k=-1))
    pos = spacing * (np.arange(sites) - 0.5 * (sites - 1))
    X = np.diag(pos)
    left = np.diag((pos < 0).astype(float))
    return ModeSystem(H, X, X.copy(), None, {"left": left, "right": np.eye(sites) - left})
