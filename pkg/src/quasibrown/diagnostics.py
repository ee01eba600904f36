"""NBML criteria: B matrix, theorem and corollary partial sums, bound chain.

``B_jk = (zeta_j - zeta_k) g_jk`` links position matrix elements to level
gaps.  For a state with energy below ``E_max``, the observable's
quasi-periodic coefficients obey
``sum |a_n||nu_n| <= E_max * (sum |B_jk|^2 / (zeta_j zeta_k))^{1/2}``
(Cauchy-Schwarz twice), so convergence of that double sum rules out a
Brownian-looking trajectory.  Verdicts from partial sums are heuristics
tagged with the budget used.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .ensembles import CoefficientSample, PositionMatrix, _zeta
from .exceptions import StructuralError, ValidationError
from .signals import QuasiPeriodicSignal, classify_convergence, sum_verdict

GROUPING_RTOL = 1e-10


def _gmat(g) -> np.ndarray:
    return g.g if isinstance(g, PositionMatrix) else np.asarray(g)


def build_B_matrix(g, spectrum, derivative_overlaps=None, hbar: float = 1.0, M: float = 1.0) -> np.ndarray:
    """``(zeta_j - zeta_k) g_jk``, or ``(hbar^2/2M)(D - D^T)`` from ``D_jk = <psi_j'|psi_k>``."""
    if derivative_overlaps is not None:
        D = np.asarray(derivative_overlaps)
        if D.ndim != 2 or D.shape[0] != D.shape[1]:
            raise StructuralError("derivative overlaps must be square")
        return hbar ** 2 / (2.0 * M) * (D - D.T)
    gm = _gmat(g)
    z = _zeta(spectrum)
    if z.size < gm.shape[0]:
        raise StructuralError("spectrum shorter than g")
    z = z[: gm.shape[0]]
    return (z[:, None] - z[None, :]) * gm


def bound_constant(e_max: float, M: float = 1.0, hbar: float = 1.0) -> float:
    """Uniform bound on ``|B_jk|``: ``sqrt(2 M E_max) (hbar^2/2M) (2/hbar)``."""
    return math.sqrt(2.0 * M * e_max) * (hbar ** 2 / (2.0 * M)) * 2.0 / hbar


def _sum_verdict(partial: np.ndarray, growth_window: int) -> str:
    return sum_verdict(partial, growth_window)


def theorem_partial_sums(B, spectrum) -> np.ndarray:
    """``T_K = sum_{j,k <= K} |B_jk|^2 / (zeta_j zeta_k)`` for ``K = 1..n``."""
    B = np.asarray(B)
    z = _zeta(spectrum)[: B.shape[0]]
    w = np.abs(B) ** 2 / np.outer(z, z)
    # each new K adds row K, column K and their shared corner once
    inc = np.array([w[k, :k + 1].sum() + w[:k, k].sum() for k in range(w.shape[0])])
    return np.cumsum(inc)


def cauchy_schwarz_chain(samples, g, spectrum, e_max: float, B=None) -> dict:
    """Per-sample ``sum|a_n||nu_n|``, ``E * sqrt(T)`` and ``E_max * sqrt(T)``."""
    gm = _gmat(g)
    z = _zeta(spectrum)[: gm.shape[0]]
    if B is None:
        B = build_B_matrix(gm, z)
    T = float(np.sum(np.abs(B) ** 2 / np.outer(z, z)))
    lhs, mid = [], []
    for sig, c in zip(observable_series_extract(samples, gm, z), _coefficients(samples)):
        lhs.append(math.fsum(np.abs(sig.amplitudes) * np.abs(sig.frequencies)))
        mid.append(float(np.dot(np.abs(c) ** 2, z)) * math.sqrt(T))
    lhs, mid = np.array(lhs), np.array(mid)
    rhs = e_max * math.sqrt(T)
    return {"lhs": lhs, "energy_bound": mid, "rhs": rhs,
            "holds": bool(np.all(lhs <= mid * (1 + 1e-12)) and np.all(mid <= rhs * (1 + 1e-12)))}


@dataclass
class NBMLReport:
    theorem_sum: np.ndarray
    corollary_sum: np.ndarray
    bound_constant: float
    bound_violations: int
    verdicts: dict
    budgets: dict
    chain: dict | None = None

    def to_json(self) -> str:
        doc = {"theorem_sum": self.theorem_sum.tolist(), "corollary_sum": self.corollary_sum.tolist(),
               "bound_constant": self.bound_constant, "bound_violations": self.bound_violations,
               "verdicts": self.verdicts, "budgets": self.budgets}
        if self.chain is not None:
            doc["chain"] = {"lhs": self.chain["lhs"].tolist(),
                            "energy_bound": self.chain["energy_bound"].tolist(),
                            "rhs": self.chain["rhs"], "holds": self.chain["holds"]}
        return json.dumps(doc)


def nbml_criteria(B, spectrum, e_max: float, samples=None, g=None, M: float = 1.0, hbar: float = 1.0,
                  growth_window: int = 10, corollary_budget: int = 10 ** 6) -> NBMLReport:
    """Theorem and corollary partial sums, the uniform bound, and the optional sample chain.

    The corollary sum ``sum 1/zeta_j`` runs over the full spectrum supplied
    (up to ``corollary_budget`` levels), the theorem sum over the modes of
    ``B``.  Both use the stall rule plus an octave decay exponent, with
    exponent >= 1.5 read as convergent and <= 1.25 as divergent.
    """
    z = _zeta(spectrum)
    if np.any(z <= 0) or np.any(np.diff(z) < 0):
        raise ValidationError("spectrum must be positive and ascending")
    B = np.asarray(B)
    n = B.shape[0]
    if z.size < n:
        raise StructuralError("spectrum shorter than B")
    th = theorem_partial_sums(B, z)
    window = min(growth_window, n)
    th_verdict = _sum_verdict(th, window)
    budget = min(z.size, corollary_budget)
    cor_sums = np.cumsum(1.0 / z[:budget])
    cor_verdict = _sum_verdict(cor_sums, min(growth_window, budget))
    if cor_verdict == "convergent":
        overall = "NBML"
    elif th_verdict == "convergent":
        overall = "NBML"
    else:
        overall = "inconclusive"
    bc = bound_constant(e_max, M, hbar)
    allowed = np.minimum.outer(z[:n], z[:n]) <= e_max
    violations = int(np.sum((np.abs(B) > bc * (1 + 1e-12)) & allowed))
    chain = None
    if samples is not None:
        if g is None:
            raise ValidationError("g is required to check the bound chain on samples")
        chain = cauchy_schwarz_chain(samples, g, z, e_max, B)
    return NBMLReport(th, cor_sums, bc, violations,
                      {"theorem": th_verdict, "corollary": cor_verdict, "overall": overall,
                       "note": "numerical heuristic, not a proof"},
                      {"theorem_modes": n, "corollary_levels": budget, "growth_window": window},
                      chain)


def _coefficients(samples):
    if hasattr(samples, "c") and not isinstance(samples, CoefficientSample):
        return np.asarray(samples.c)
    return [s.c if isinstance(s, CoefficientSample) else np.asarray(s, dtype=complex) for s in samples]


def group_frequencies(nu: np.ndarray, tol: float) -> np.ndarray:
    """Cluster labels for values whose sorted neighbours lie within ``tol``."""
    order = np.argsort(nu, kind="stable")
    labels = np.empty(nu.size, dtype=int)
    label = 0
    for i, idx in enumerate(order):
        if i and nu[idx] - nu[order[i - 1]] >= tol:
            label += 1
        labels[idx] = label
    return labels


def _extract_one(c, gm, omega, tol):
    amp = np.conj(c)[:, None] * c[None, :] * gm  # term for e^{i (omega_j - omega_k) t}
    nu = (omega[:, None] - omega[None, :]).ravel()
    amp = amp.ravel()
    labels = group_frequencies(nu, tol)
    freqs, amps, offset = [], [], 0.0
    for lab in range(labels.max() + 1):
        sel = labels == lab
        f = float(np.mean(nu[sel]))
        a = complex(np.sum(amp[sel]))
        if abs(f) < tol:
            offset += a.real
        elif f > 0:
            freqs.append(f)
            amps.append(2.0 * a)
    return QuasiPeriodicSignal(np.array(amps, dtype=complex), np.array(freqs), offset)


def observable_series_extract(samples, g, spectrum, hbar: float = 1.0) -> list[QuasiPeriodicSignal]:
    """Per-sample quasi-periodic form of ``<psi(t)|X|psi(t)>``.

    Terms ``c_j^* c_k g_jk e^{i(omega_j - omega_k) t}`` are grouped by
    frequency difference (exact ties within ``1e-10`` of the spectral
    radius), conjugate pairs folded onto positive frequencies with doubled
    amplitude, and the zero-frequency bin stored as the offset.
    """
    gm = _gmat(g)
    z = _zeta(spectrum)
    n = gm.shape[0]
    if z.size < n:
        raise StructuralError("spectrum shorter than g")
    omega = z[:n] / hbar
    tol = GROUPING_RTOL * max(float(np.max(np.abs(omega))), 1e-300)
    out = []
    for c in _coefficients(samples):
        c = np.asarray(c, dtype=complex)
        if c.size != n:
            raise StructuralError("coefficient length differs from g")
        out.append(_extract_one(c, gm, omega, tol))
    return out


def nbml_fraction(signals) -> float:
    """Share of signals that :func:`signals.classify_convergence` calls NBML."""
    verdicts = [classify_convergence(s.amplitudes, s.frequencies, term_budget=max(len(s) + 1, 10)).verdict
                for s in signals]
    return sum(v == "NBML" for v in verdicts) / max(len(verdicts), 1)
