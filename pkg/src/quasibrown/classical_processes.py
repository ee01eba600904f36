"""Wiener and Ornstein-Uhlenbeck paths from random Fourier series.

The series are evaluated on ``[0, 1]``; longer intervals are the caller's
job (rescale time and amplitude).  ``series_scale`` multiplies every
``n >= 1`` term.  The unit normalisation is ``series_scale=1``;
with ``series_scale=sqrt(2)`` the cosine basis of the driving noise is
orthonormal on ``[0, 1]`` and the second moments become exactly those of
the Wiener/OU processes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _rng
from ._validation import as_time_grid, check_positive
from .exceptions import StructuralError, ValidationError
from .signals import Trajectory, fsum_rows

DISTRIBUTIONS = ("gaussian", "sphere-uniform")
FIG1_GAMMA = 10.0
FIG1_TERMS = 1000
FIG1_GRID = 512


@dataclass(frozen=True)
class OUParams:
    gamma: float
    n_terms: int
    seed: int = 0

    def __post_init__(self):
        check_positive(self.gamma, "gamma")
        if int(self.n_terms) < 1:
            raise ValidationError("n_terms must be >= 1")


@dataclass(frozen=True)
class CoefficientDraw:
    a: np.ndarray  # a_0 .. a_N
    distribution: str
    seed: int
    stream: int = 0

    @property
    def n_terms(self) -> int:
        return self.a.size - 1


def draw_coefficients(n_terms: int, seed: int, distribution: str = "gaussian",
                      stream: int = 0) -> CoefficientDraw:
    """Draw ``a_0 .. a_N`` from stream ``stream`` of ``seed``.

    ``gaussian`` gives i.i.d. N(0, 1); ``sphere-uniform`` rescales the same
    normals onto the unit sphere ``sum a_n^2 = 1``.
    """
    n_terms = int(n_terms)
    if n_terms < 1:
        raise ValidationError("n_terms must be >= 1")
    if distribution not in DISTRIBUTIONS:
        raise ValidationError(f"distribution must be one of {DISTRIBUTIONS}")
    gen = _rng.make_stream(seed, stream, _rng.PURPOSE_COEFFICIENTS)
    a = _rng.polar_normal(gen, n_terms + 1)
    if distribution == "sphere-uniform":
        a = a / np.sqrt(np.sum(a * a))
    return CoefficientDraw(a, distribution, int(seed), int(stream))


def draw_matrix(n_draws: int, n_terms: int, seed: int, distribution: str = "gaussian") -> np.ndarray:
    """Row ``i`` equals ``draw_coefficients(n_terms, seed, distribution, stream=i).a``."""
    a = _rng.normal_matrix(seed, n_draws, n_terms + 1, _rng.PURPOSE_COEFFICIENTS)
    if distribution == "sphere-uniform":
        a /= np.sqrt(np.sum(a * a, axis=1, keepdims=True))
    elif distribution != "gaussian":
        raise ValidationError(f"distribution must be one of {DISTRIBUTIONS}")
    return a


def _unit_interval(times) -> np.ndarray:
    t = as_time_grid(times)
    if t.size and (t[0] < 0.0 or t[-1] > 1.0):
        raise ValidationError("times must lie in [0, 1]; rescale longer intervals")
    return t


def wiener_basis(n_terms: int, times, series_scale: float = 1.0) -> np.ndarray:
    """Matrix ``W[i, n]`` with ``Re w_c(t_i) = sum_n a_n W[i, n]``."""
    t = _unit_interval(times)
    n = np.arange(1, n_terms + 1)
    w = np.empty((t.size, n_terms + 1))
    w[:, 0] = t
    w[:, 1:] = series_scale * np.sin(np.pi * np.outer(t, n)) / (np.pi * n)
    return w


def wiener_complex_basis(n_terms: int, times) -> np.ndarray:
    """Complex basis of ``w_c(t) = a_0 t + sum a_n (e^{i pi n t} - 1)/(i pi n)``."""
    t = _unit_interval(times)
    n = np.arange(1, n_terms + 1)
    w = np.empty((t.size, n_terms + 1), dtype=complex)
    w[:, 0] = t
    w[:, 1:] = np.expm1(1j * np.pi * np.outer(t, n)) / (1j * np.pi * n)
    return w


def wiener_two_sided_basis(n_terms: int, times) -> np.ndarray:
    """Columns ``n = -N..N`` of ``sum a_n (e^{i pi n t} - 1)/(i pi n sqrt 2)`` (``t/sqrt 2`` at n = 0).

    ``e^{i pi n s}/sqrt 2`` is orthonormal on ``[0, 2]``, so by Parseval the
    second moment is exactly ``t`` in the limit of many terms.
    """
    t = _unit_interval(times)
    n = np.arange(-n_terms, n_terms + 1)
    w = np.empty((t.size, n.size), dtype=complex)
    nz = n != 0
    w[:, ~nz] = t[:, None]
    w[:, nz] = np.expm1(1j * np.pi * np.outer(t, n[nz])) / (1j * np.pi * n[nz])
    return w / np.sqrt(2.0)


def ou_basis(gamma: float, n_terms: int, times, series_scale: float = 1.0) -> np.ndarray:
    """Matrix ``U[i, n]`` with ``Re x_c(t_i) = sum_n a_n U[i, n]`` (real a_n).

    Column 0 carries ``a_0 t / gamma - (1 - e^{-gamma t}) / gamma^2``; column
    n >= 1 carries the sine, one-minus-cosine and transient weights.
    """
    gamma = check_positive(gamma, "gamma")
    t = _unit_interval(times)
    n = np.arange(1, n_terms + 1)
    pn = np.pi * n
    den = gamma ** 2 + pn ** 2
    theta = np.outer(t, pn)
    transient = -np.expm1(-gamma * t)  # 1 - e^{-gamma t}
    u = np.empty((t.size, n_terms + 1))
    u[:, 0] = t / gamma - transient / gamma ** 2
    u[:, 1:] = series_scale * (
        (gamma / (den * pn)) * np.sin(theta)
        + (2.0 / den) * np.sin(0.5 * theta) ** 2
        - np.outer(transient, 1.0 / den)
    )
    return u


def _check_draw(draw: CoefficientDraw, n_terms: int | None = None):
    if n_terms is not None and draw.a.size != n_terms + 1:
        raise StructuralError(f"draw has {draw.a.size} coefficients, expected {n_terms + 1}")


def wiener_series_sample(draw: CoefficientDraw, times, series_scale: float = 1.0) -> Trajectory:
    """``a_0 t + sum a_n sin(pi n t) / (pi n)`` on ``times`` in [0, 1]."""
    basis = wiener_basis(draw.n_terms, times, series_scale)
    values = fsum_rows(basis * draw.a)
    return Trajectory(_unit_interval(times), values, {
        "generator": "wiener_series", "seed": draw.seed, "stream": draw.stream,
        "truncation": draw.n_terms, "distribution": draw.distribution,
        "series_scale": series_scale})


def wiener_complex_series(draw: CoefficientDraw, times) -> np.ndarray:
    """Complex Wiener construction ``w_c(t)`` (values only)."""
    basis = wiener_complex_basis(draw.n_terms, times)
    prod = basis * draw.a
    return fsum_rows(prod.real) + 1j * fsum_rows(prod.imag)


def ou_series_sample(params: OUParams, draw: CoefficientDraw, times,
                     series_scale: float = 1.0) -> Trajectory:
    """Real part of the OU position series, ``x_c(0) = 0`` and ``v(0) = 0``."""
    _check_draw(draw, params.n_terms)
    basis = ou_basis(params.gamma, params.n_terms, times, series_scale)
    values = fsum_rows(basis * draw.a)
    return Trajectory(_unit_interval(times), values, {
        "generator": "ou_series", "gamma": params.gamma, "seed": draw.seed,
        "stream": draw.stream, "truncation": params.n_terms,
        "distribution": draw.distribution, "series_scale": series_scale})


def ou_series_variance(gamma: float, n_terms: int, times, series_scale: float = 1.0) -> np.ndarray:
    """Ensemble variance of the OU series for i.i.d. unit-variance a_n."""
    u = ou_basis(gamma, n_terms, times, series_scale)
    return np.sum(u * u, axis=1)


_TAYLOR_SWITCH = 0.5
_TAYLOR_ORDER = 30


def _ou_msd_reduced(u: np.ndarray) -> np.ndarray:
    """``u + (1 - e^{-2u})/2 - 2(1 - e^{-u})``, accurate for every u >= 0."""
    out = np.empty_like(u)
    big = u >= _TAYLOR_SWITCH
    ub = u[big]
    out[big] = ub - 0.5 * np.expm1(-2.0 * ub) + 2.0 * np.expm1(-ub)
    us = u[~big]
    if us.size:
        # sum_{k>=3} (-1)^{k+1} (2^{k-1} - 2) u^k / k!
        acc = np.zeros_like(us)
        term = us ** 2 / 2.0  # u^k / k! at k = 2
        for k in range(3, _TAYLOR_ORDER + 1):
            term = term * us / k
            acc += (-1) ** (k + 1) * (2.0 ** (k - 1) - 2.0) * term
        out[~big] = acc
    return out


def ou_msd_analytic(gamma: float, t):
    """Closed-form OU mean-square displacement with ``v(0) = 0``.

    ``(1/gamma^2) {t + (1 - e^{-2 gamma t})/(2 gamma) - 2 (1 - e^{-gamma t})/gamma}``;
    for ``gamma t < 0.5`` the bracket is summed from its Taylor series
    (leading term ``gamma^3 t^3 / 3``) to avoid cancellation.
    """
    gamma = check_positive(gamma, "gamma")
    arr = np.asarray(t, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any(arr < 0):
        raise ValidationError("t must be finite and non-negative")
    u = np.atleast_1d(gamma * arr)
    val = _ou_msd_reduced(u) / gamma ** 3
    return float(val[0]) if arr.ndim == 0 else val.reshape(arr.shape)


def _with_origin(times) -> tuple[np.ndarray, bool]:
    t = as_time_grid(times)
    if t.size == 0 or t[0] < 0:
        raise ValidationError("times must be non-negative")
    if t[0] == 0.0:
        return t, False
    return np.concatenate([[0.0], t]), True


def _ou_exact_paths(gamma: float, grid: np.ndarray, noise: np.ndarray):
    """Velocity by the exact Gaussian kernel, position by trapezoid rule."""
    dt = np.diff(grid)
    decay = np.exp(-gamma * dt)
    sd = np.sqrt(-np.expm1(-2.0 * gamma * dt) / (2.0 * gamma))
    n_paths = noise.shape[0]
    v = np.zeros((n_paths, grid.size))
    x = np.zeros((n_paths, grid.size))
    for i in range(dt.size):
        v[:, i + 1] = decay[i] * v[:, i] + sd[i] * noise[:, i]
        x[:, i + 1] = x[:, i] + 0.5 * dt[i] * (v[:, i] + v[:, i + 1])
    return v, x


def ou_exact_sample(gamma: float, times, seed: int, stream: int = 0) -> tuple[Trajectory, np.ndarray]:
    """One OU path with ``v(0) = x(0) = 0``.

    Returns the position trajectory and the velocity values on the same
    grid.  Position accuracy is that of the trapezoid rule on ``times``.
    """
    gamma = check_positive(gamma, "gamma")
    grid, added = _with_origin(times)
    noise = _rng.polar_normal(_rng.make_stream(seed, stream, _rng.PURPOSE_OU_EXACT), grid.size - 1)
    v, x = _ou_exact_paths(gamma, grid, noise[None, :])
    sl = slice(1, None) if added else slice(None)
    traj = Trajectory(grid[sl], x[0, sl], {
        "generator": "ou_exact", "gamma": gamma, "seed": seed, "stream": stream})
    return traj, v[0, sl]


def ou_exact_ensemble(gamma: float, times, seed: int, n_paths: int) -> np.ndarray:
    """Positions ``(n_paths, len(times))``; path ``i`` uses stream ``i``."""
    gamma = check_positive(gamma, "gamma")
    grid, added = _with_origin(times)
    noise = _rng.normal_matrix(seed, n_paths, grid.size - 1, _rng.PURPOSE_OU_EXACT)
    _, x = _ou_exact_paths(gamma, grid, noise)
    return x[:, 1:] if added else x


def series_ensemble(basis: np.ndarray, n_draws: int, seed: int,
                    distribution: str = "gaussian", chunk: int = 2000) -> np.ndarray:
    """Evaluate ``n_draws`` coefficient draws against a basis matrix.

    Uses BLAS products rather than compensated sums; the Monte Carlo error
    dwarfs the rounding error here.
    """
    n_terms = basis.shape[1] - 1
    out = np.empty((n_draws, basis.shape[0]), dtype=basis.dtype)
    for start in range(0, n_draws, chunk):
        stop = min(n_draws, start + chunk)
        a = _rng.normal_matrix(seed, stop - start, n_terms + 1,
                               _rng.PURPOSE_COEFFICIENTS, first_stream=start)
        if distribution == "sphere-uniform":
            a /= np.sqrt(np.sum(a * a, axis=1, keepdims=True))
        out[start:stop] = a @ basis.T
    return out


def msd_table(gamma: float, times, n_paths: int, seed: int, n_terms: int = FIG1_TERMS,
              fine_steps: int = 2048, series_scale: float = 1.0) -> dict:
    """Columns ``t, msd_analytic, msd_series_mc, msd_exact_mc, stderr``.

    ``stderr`` is the standard error of the exact-discretization estimate.
    """
    t = _unit_interval(times)
    fine = np.linspace(0.0, 1.0, fine_steps + 1)
    merged = np.union1d(fine, t)
    idx = np.searchsorted(merged, t)
    x_exact = ou_exact_ensemble(gamma, merged, seed, n_paths)[:, idx]
    sq = x_exact ** 2
    x_series = series_ensemble(ou_basis(gamma, n_terms, t, series_scale), n_paths, seed)
    return {
        "t": t,
        "msd_analytic": ou_msd_analytic(gamma, t),
        "msd_series_mc": np.mean(x_series ** 2, axis=0),
        "msd_exact_mc": sq.mean(axis=0),
        "stderr": sq.std(axis=0, ddof=1) / np.sqrt(n_paths),
    }


def count_direction_reversals(values) -> int:
    """Sign changes of the discrete differences."""
    d = np.diff(np.asarray(values, dtype=float))
    d = d[d != 0]
    return int(np.count_nonzero(np.sign(d[1:]) != np.sign(d[:-1])))
