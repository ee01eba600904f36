"""Quasi-periodic signals ``f(t) = offset + Re sum_n a_n exp(i nu_n t)``.

Frequencies are angular (radians per unit time); a ``sin(pi n t)`` term is
stored with ``nu = pi * n``.  Every series in the package is summed with
:func:`math.fsum`, which tracks the exact running error, so the result for
a given list of terms is correctly rounded and independent of term order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from ._validation import as_finite, as_time_grid
from .exceptions import StructuralError, ValidationError

#: relative growth below which a partial-sum tail counts as stalled
STALL_TOL = 1e-9
#: octave decay exponent at or below which an unstalled tail is read as divergent
DIVERGENT_EXPONENT = 1.25
#: decay exponent at or above which an unstalled tail is read as convergent
CONVERGENT_EXPONENT = 1.5

SeriesLike = Union[Sequence[complex], np.ndarray, Callable[[np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class QuasiPeriodicSignal:
    amplitudes: np.ndarray
    frequencies: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.amplitudes, dtype=complex))
        nu = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        if a.ndim != 1 or nu.ndim != 1 or a.shape != nu.shape:
            raise StructuralError(
                f"amplitudes {a.shape} and frequencies {nu.shape} must be 1-D of equal length")
        as_finite(a, "amplitudes", complex)
        as_finite(nu, "frequencies")
        if not np.isfinite(self.offset):
            raise ValidationError("offset must be finite")
        object.__setattr__(self, "amplitudes", a)
        object.__setattr__(self, "frequencies", nu)
        object.__setattr__(self, "offset", float(self.offset))

    def __len__(self):
        return self.amplitudes.size

    def concat(self, other: "QuasiPeriodicSignal") -> "QuasiPeriodicSignal":
        return QuasiPeriodicSignal(
            np.concatenate([self.amplitudes, other.amplitudes]),
            np.concatenate([self.frequencies, other.frequencies]),
            self.offset + other.offset,
        )


@dataclass
class Trajectory:
    """Sampled real observable with provenance metadata."""

    times: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = as_time_grid(self.times)
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if self.values.shape != self.times.shape:
            raise StructuralError(
                f"times {self.times.shape} and values {self.values.shape} differ in length")
        as_finite(self.values, "values")

    def __len__(self):
        return self.times.size


@dataclass
class TailReport:
    stalled: bool
    relative_increase: float
    decay_exponent: float
    status: str  # "convergent" | "divergent" | "inconclusive"


@dataclass
class ConvergenceVerdict:
    sum_abs_a: np.ndarray
    sum_abs_a_nu: np.ndarray
    verdict: str  # "BML-candidate" | "NBML" | "inconclusive"
    rationale: str
    term_budget: int
    growth_window: int


def fsum_rows(terms: np.ndarray) -> np.ndarray:
    """Correctly rounded sum along the last axis of a 2-D array."""
    terms = np.asarray(terms, dtype=float)
    return np.array([math.fsum(row) for row in terms])


def evaluate_qp(signal: QuasiPeriodicSignal, times, meta: dict | None = None,
                chunk: int = 256) -> Trajectory:
    """Evaluate the signal on a strictly increasing time grid."""
    t = as_time_grid(times)
    a, nu = signal.amplitudes, signal.frequencies
    values = np.empty(t.size)
    for start in range(0, t.size, chunk):
        tc = t[start:start + chunk]
        phase = np.outer(tc, nu)
        terms = a.real * np.cos(phase) - a.imag * np.sin(phase)
        if terms.shape[1]:
            terms = np.concatenate([terms, np.full((tc.size, 1), signal.offset)], axis=1)
            values[start:start + chunk] = fsum_rows(terms)
        else:
            values[start:start + chunk] = signal.offset
    info = {"generator": "evaluate_qp", "truncation": len(signal)}
    info.update(meta or {})
    return Trajectory(t, values, info)


def _series_terms(seq: SeriesLike, budget: int | None, name: str, dtype):
    if callable(seq):
        if budget is None:
            raise ValidationError(f"term_budget is required when {name} is a callable")
        n = np.arange(1, budget + 1)
        vals = np.asarray(seq(n), dtype=dtype)
        if vals.shape != n.shape:
            raise StructuralError(f"{name} callable must map an index array to an equal-size array")
        return as_finite(vals, name, dtype), False
    vals = np.atleast_1d(np.asarray(seq, dtype=dtype))
    as_finite(vals, name, dtype)
    if budget is None:
        return vals, True
    return vals[:budget], vals.size < budget


def tail_behaviour(partial_sums: np.ndarray, growth_window: int,
                   stall_tol: float = STALL_TOL) -> TailReport:
    """Classify the tail of a nondecreasing partial-sum table.

    Stalled means the last ``growth_window`` partial sums rise by less than
    ``stall_tol`` relative to the final sum.  An unstalled tail is called
    divergent when the growth over the last octave of terms is at least
    comparable to the octave before it (decay exponent <= 1.25, as for
    sum 1/n), otherwise inconclusive.
    """
    s = np.asarray(partial_sums, dtype=float)
    n = s.size
    if n == 0:
        return TailReport(True, 0.0, math.inf, "convergent")
    w = min(growth_window, n)
    last = s[-1]
    first = s[n - w] if n - w >= 0 else 0.0
    rise = last - first
    rel = 0.0 if rise == 0 else rise / abs(last)
    p = math.nan
    if n >= 8:
        upper = s[n - 1] - s[n // 2 - 1]
        lower = s[n // 2 - 1] - s[n // 4 - 1]
        if lower > 0 and upper > 0:
            p = 1.0 - math.log2(upper / lower)
        elif upper == 0:
            p = math.inf
    if rel < stall_tol:
        return TailReport(True, rel, p, "convergent")
    status = "divergent" if (not math.isnan(p) and p <= DIVERGENT_EXPONENT) else "inconclusive"
    return TailReport(False, rel, p, status)


def sum_verdict(partial_sums: np.ndarray, growth_window: int, stall_tol: float = STALL_TOL) -> str:
    """Convergent / divergent / inconclusive reading of a partial-sum table.

    Like :func:`tail_behaviour`, but an unstalled tail whose octave decay
    exponent is at least ``CONVERGENT_EXPONENT`` (terms falling like n^-1.5
    or faster) also counts as convergent.
    """
    rep = tail_behaviour(partial_sums, growth_window, stall_tol)
    if rep.stalled or rep.decay_exponent >= CONVERGENT_EXPONENT:
        return "convergent"
    return rep.status


def classify_convergence(amplitudes: SeriesLike, frequencies: SeriesLike,
                         term_budget: int | None = None, growth_window: int = 10,
                         stall_tol: float = STALL_TOL) -> ConvergenceVerdict:
    """Heuristic BML/NBML reading of sum|a_n| and sum|a_n||nu_n|.

    Either argument may be a finite sequence or a callable evaluated on
    ``n = 1..term_budget``.  A sequence shorter than the budget is a finite
    sum and is NBML outright.
    """
    if term_budget is not None and not (term_budget >= growth_window >= 2):
        raise ValidationError("require term_budget >= growth_window >= 2")
    if growth_window < 2:
        raise ValidationError("growth_window must be >= 2")
    a, a_finite = _series_terms(amplitudes, term_budget, "amplitudes", complex)
    nu, nu_finite = _series_terms(frequencies, term_budget, "frequencies", float)
    m = min(a.size, nu.size)
    if a.size != nu.size and not (callable(amplitudes) or callable(frequencies)):
        raise StructuralError("amplitudes and frequencies differ in length")
    a, nu = a[:m], nu[:m]
    budget = term_budget if term_budget is not None else m
    sa = np.cumsum(np.abs(a))
    sb = np.cumsum(np.abs(a) * np.abs(nu))

    if m == 0:
        return ConvergenceVerdict(sa, sb, "NBML", "finite/empty sum", budget, growth_window)
    if a_finite or nu_finite:
        return ConvergenceVerdict(
            sa, sb, "NBML",
            f"finite sum of {m} terms (< budget {budget}): a finite frequency set is an oscillation",
            budget, growth_window)

    ta = tail_behaviour(sa, growth_window, stall_tol)
    tb = tail_behaviour(sb, growth_window, stall_tol)
    detail = (f"sum|a|: rel. rise {ta.relative_increase:.3g}, decay exp {ta.decay_exponent:.3g}; "
              f"sum|a||nu|: rel. rise {tb.relative_increase:.3g}, decay exp {tb.decay_exponent:.3g}; "
              f"budget {budget}, window {growth_window}. Numerical heuristic, not a proof.")
    if ta.stalled and tb.stalled:
        verdict = "NBML"
    elif "divergent" in (ta.status, tb.status):
        verdict = "BML-candidate"
    else:
        verdict = "inconclusive"
    return ConvergenceVerdict(sa, sb, verdict, detail, budget, growth_window)
