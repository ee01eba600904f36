"""Gibbs ensembles of wavefunction coefficients and their mean-square displacement.

Coefficients live on the unit sphere of ``C^n`` (uniform surface measure),
weighted by ``exp(-beta sum |c_k|^2 zeta_k)`` and restricted to
``sum |c_k|^2 zeta_k < e_max``.  hbar = 1 throughout, so ``omega = zeta``.

The position matrix used for MSD work is the single-particle box
surrogate: exact eigenfunctions of the toy model are not available, so
``<k|X|j>`` for a particle in ``[-A, A]`` stands in for them.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _rng
from ._validation import as_time_grid, check_positive
from .exceptions import StructuralError, ValidationError
from .signals import Trajectory
from .spectra import SpectrumModel

TRUNCATION_WEIGHT = 1e-6


class SamplingQualityWarning(UserWarning):
    pass


def _zeta(spectrum) -> np.ndarray:
    if isinstance(spectrum, SpectrumModel):
        return spectrum.eigenvalues
    return np.asarray(spectrum, dtype=float)


def modes_for_weight(spectrum, beta: float, ratio: float = TRUNCATION_WEIGHT) -> int:
    """Smallest ``n`` with Gibbs weight of mode ``n`` below ``ratio`` times mode 1."""
    z = _zeta(spectrum)
    if beta <= 0:
        return z.size
    w = np.exp(-beta * (z - z[0]))
    below = np.nonzero(w < ratio)[0]
    return int(below[0] + 1) if below.size else z.size


@dataclass(frozen=True)
class GibbsEnsembleSpec:
    spectrum: object
    beta: float
    e_max: float
    n_modes: int | None = None
    seed: int = 0
    n_chains: int = 32
    rotation_width: float = 0.3
    phase_width: float = math.pi
    burn_in: int | None = None
    thin: int | None = None
    min_ess: float = 400.0

    def __post_init__(self):
        z = _zeta(self.spectrum)
        n = self.n_modes if self.n_modes is not None else modes_for_weight(z, self.beta)
        if n < 2 or n > z.size:
            raise ValidationError(f"n_modes must be in [2, {z.size}]")
        if np.any(np.diff(z[:n]) < 0):
            raise ValidationError("spectrum must be ascending")
        if self.beta < 0:
            raise ValidationError("beta must be >= 0")
        if not self.e_max > z[0]:
            raise ValidationError(f"infeasible cap: e_max={self.e_max!r} <= zeta_1={z[0]!r}")
        object.__setattr__(self, "n_modes", int(n))

    @property
    def zeta(self) -> np.ndarray:
        return _zeta(self.spectrum)[: self.n_modes]

    @property
    def burn_in_steps(self) -> int:
        return self.burn_in if self.burn_in is not None else 1000 * self.n_modes

    @property
    def thin_steps(self) -> int:
        return self.thin if self.thin is not None else self.n_modes


@dataclass(frozen=True)
class CoefficientSample:
    c: np.ndarray

    def energy(self, zeta) -> float:
        return float(np.dot(np.abs(self.c) ** 2, zeta))


@dataclass
class GibbsSamples:
    """Draws of shape ``(n_chains, n_per_chain, n_modes)``, chain-major when flattened."""

    chains: np.ndarray
    spec: GibbsEnsembleSpec
    acceptance_rate: float
    ess: float
    warnings: list = field(default_factory=list)

    @property
    def c(self) -> np.ndarray:
        return self.chains.reshape(-1, self.chains.shape[-1])

    def __len__(self):
        return self.chains.shape[0] * self.chains.shape[1]

    def __getitem__(self, i):
        return CoefficientSample(self.c[i])

    def __iter__(self):
        return (CoefficientSample(row) for row in self.c)

    def energies(self) -> np.ndarray:
        return _energy(self.c, self.spec.zeta)


def _energy(c: np.ndarray, zeta: np.ndarray) -> np.ndarray:
    return (c.real ** 2 + c.imag ** 2) @ zeta


def _chain_randoms(gens, n_steps: int, n: int) -> np.ndarray:
    return np.stack([g.random((n_steps, n + 4)) for g in gens])


def gibbs_sample(spec: GibbsEnsembleSpec, n_samples: int, chunk: int = 2048) -> GibbsSamples:
    """Metropolis sampling of the capped Gibbs ensemble.

    Each step is a two-mode Givens rotation (angle uniform in
    ``+-rotation_width``) accepted with ``min(1, e^{-beta dE})`` and rejected
    outright if it breaks the cap, followed by independent phase kicks on
    every mode.  Phase kicks leave the energy alone, so they are always
    accepted.  Chains are vectorized; chain ``i`` draws from its own stream.
    The sample count is rounded up to a multiple of the chain count.
    """
    if n_samples < 1:
        raise ValidationError("n_samples must be >= 1")
    zeta = spec.zeta
    n = spec.n_modes
    n_chains = min(spec.n_chains, n_samples)
    per_chain = -(-n_samples // n_chains)
    gens = [_rng.make_stream(spec.seed, i, _rng.PURPOSE_GIBBS) for i in range(n_chains)]

    c = np.zeros((n_chains, n), dtype=complex)
    c[:, 0] = 1.0
    energy = _energy(c, zeta)
    rows = np.arange(n_chains)
    out = np.empty((n_chains, per_chain, n), dtype=complex)
    total_steps = spec.burn_in_steps + per_chain * spec.thin_steps
    accepted = 0
    step = 0
    stored = 0
    while step < total_steps:
        block = min(chunk, total_steps - step)
        rnd = _chain_randoms(gens, block, n)
        for s in range(block):
            r = rnd[:, s]
            j = np.minimum((r[:, 0] * n).astype(np.int64), n - 1)
            k = (j + 1 + np.minimum((r[:, 1] * (n - 1)).astype(np.int64), n - 2)) % n
            theta = spec.rotation_width * (2.0 * r[:, 2] - 1.0)
            cs, sn = np.cos(theta), np.sin(theta)
            cj, ck = c[rows, j], c[rows, k]
            prop = c.copy()
            prop[rows, j] = cs * cj - sn * ck
            prop[rows, k] = sn * cj + cs * ck
            e_new = _energy(prop, zeta)
            ok = (e_new < spec.e_max) & (r[:, 3] < np.exp(-spec.beta * (e_new - energy)))
            c[ok] = prop[ok]
            energy[ok] = e_new[ok]
            accepted += int(ok.sum())
            c *= np.exp(1j * spec.phase_width * (2.0 * r[:, 4:] - 1.0))
            step += 1
            done = step - spec.burn_in_steps
            if done > 0 and done % spec.thin_steps == 0 and stored < per_chain:
                out[:, stored] = c
                stored += 1

    samples = GibbsSamples(out, spec, accepted / (total_steps * n_chains), 0.0)
    weights = np.abs(out) ** 2
    stats = np.concatenate([weights, _energy(out, zeta)[..., None]], axis=-1)
    samples.ess = float(np.min(effective_sample_size(stats)))
    if samples.ess < spec.min_ess:
        msg = f"effective sample size {samples.ess:.0f} below threshold {spec.min_ess:.0f}"
        samples.warnings.append(msg)
        warnings.warn(msg, SamplingQualityWarning, stacklevel=2)
    return samples


def _autocorr(x: np.ndarray) -> np.ndarray:
    """Chain-averaged normalized autocorrelation along axis 1 of ``(chains, draws, ...)``."""
    n = x.shape[1]
    xc = x - x.mean(axis=1, keepdims=True)
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, n=size, axis=1)
    acf = np.fft.irfft(f * np.conj(f), n=size, axis=1)[:, :n]
    acf = acf.mean(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        acf = acf / acf[0]
    return np.nan_to_num(acf, nan=0.0)


def integrated_time(x: np.ndarray, c: float = 5.0) -> np.ndarray:
    """Integrated autocorrelation time with Sokal's automatic window."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 2:
        x = x[..., None]
    rho = _autocorr(x)
    taus = 2.0 * np.cumsum(rho, axis=0) - 1.0
    n = x.shape[1]
    out = np.empty(taus.shape[1:])
    for idx in np.ndindex(*taus.shape[1:]):
        t = taus[(slice(None),) + idx]
        m = np.arange(n) < c * t
        win = int(np.argmin(m)) if not np.all(m) else n - 1
        out[idx] = max(t[win], 1.0)
    return out


def effective_sample_size(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return x.shape[0] * x.shape[1] / integrated_time(x)


def _mean_se(x: np.ndarray, block: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Mean over (chains, draws) and autocorrelation-aware standard error."""
    mean = x.mean(axis=(0, 1))
    var = x.reshape(-1, *x.shape[2:]).var(axis=0, ddof=1)
    flat = x.reshape(x.shape[0], x.shape[1], -1)
    ess = np.concatenate([effective_sample_size(flat[..., i:i + block])
                          for i in range(0, flat.shape[2], block)])
    return mean, np.sqrt(var / ess.reshape(x.shape[2:]))


def _complex_mean_se(z: np.ndarray):
    mr, sr = _mean_se(z.real)
    mi, si = _mean_se(z.imag)
    return mr + 1j * mi, np.hypot(sr, si)


@dataclass
class MomentReport:
    second: np.ndarray          # E |c_k|^2
    second_se: np.ndarray
    cross: np.ndarray           # E c_j c_k^*
    cross_se: np.ndarray
    noconj: np.ndarray          # E c_j c_k
    noconj_se: np.ndarray
    pair: np.ndarray            # E |c_j|^2 |c_k|^2
    pair_se: np.ndarray
    n_samples: int

    def to_dict(self) -> dict:
        def cplx(z):
            return {"re": np.real(z).tolist(), "im": np.imag(z).tolist()}
        return {
            "n_samples": self.n_samples,
            "second": self.second.tolist(), "second_se": self.second_se.tolist(),
            "cross": cplx(self.cross), "cross_se": self.cross_se.tolist(),
            "noconj": cplx(self.noconj), "noconj_se": self.noconj_se.tolist(),
            "pair": self.pair.tolist(), "pair_se": self.pair_se.tolist(),
        }


def _as_chains(samples) -> np.ndarray:
    if isinstance(samples, GibbsSamples):
        return samples.chains
    arr = np.asarray([s.c if isinstance(s, CoefficientSample) else s for s in samples], dtype=complex)
    return arr[None]


def coefficient_moments(samples) -> MomentReport:
    """First- and fourth-order coefficient moments with standard errors.

    Standard errors account for autocorrelation along each chain.
    """
    ch = _as_chains(samples)
    n_total = ch.shape[0] * ch.shape[1]
    if n_total < 100:
        raise ValidationError("need at least 100 samples")
    n = ch.shape[-1]
    w = np.abs(ch) ** 2
    second, second_se = _mean_se(w)
    cross = np.empty((n, n), dtype=complex)
    noconj = np.empty((n, n), dtype=complex)
    pair = np.empty((n, n))
    cross_se, noconj_se, pair_se = np.empty((n, n)), np.empty((n, n)), np.empty((n, n))
    for j in range(n):  # row by row keeps memory linear in the sample count
        cj = ch[..., j:j + 1]
        cross[j], cross_se[j] = _complex_mean_se(cj * np.conj(ch))
        noconj[j], noconj_se[j] = _complex_mean_se(cj * ch)
        pair[j], pair_se[j] = _mean_se(w[..., j:j + 1] * w)
    return MomentReport(second, second_se, cross, cross_se, noconj, noconj_se, pair, pair_se, n_total)


# --------------------------------------------------------------------------
# box surrogate


@dataclass
class PositionMatrix:
    g: np.ndarray
    b: np.ndarray | None = None

    def __post_init__(self):
        g = np.asarray(self.g)
        if g.ndim != 2 or g.shape[0] != g.shape[1]:
            raise StructuralError("g must be square")
        if np.max(np.abs(g - g.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(g))):
            raise ValidationError("g must be Hermitian")
        self.g = g
        if self.b is not None:
            self.b = np.asarray(self.b)
            if self.b.shape != g.shape:
                raise StructuralError("b and g differ in shape")

    @property
    def n_modes(self) -> int:
        return self.g.shape[0]

    def identity_residual(self, zeta) -> float:
        """``max |g_jk (zeta_j - zeta_k) - b_jk|``."""
        if self.b is None:
            raise ValidationError("no b matrix stored")
        z = np.asarray(zeta, dtype=float)[: self.n_modes]
        return float(np.max(np.abs(self.g * (z[:, None] - z[None, :]) - self.b)))


def box_spectrum(n_modes: int, A: float = 0.5, M: float = 1.0, hbar: float = 1.0) -> SpectrumModel:
    """``zeta_k = hbar^2 pi^2 k^2 / (2 M (2A)^2)``."""
    k = np.arange(1, n_modes + 1)
    z = (hbar * np.pi * k) ** 2 / (2.0 * M * (2.0 * A) ** 2)
    return SpectrumModel(z, [{"k": int(i)} for i in k], "analytic-rectangle")


def box_position_matrix(n_modes: int, A: float = 0.5) -> PositionMatrix:
    """``<k|X|j>`` for ``psi_k = A^{-1/2} sin(k pi (X + A) / 2A)`` on ``[-A, A]``.

    Zero on the diagonal and for even ``k - j``; ``-16 A k j / (pi^2 (k^2 - j^2)^2)``
    for odd ``k - j``.
    """
    if n_modes < 2:
        raise ValidationError("n_modes must be >= 2")
    check_positive(A, "A")
    k = np.arange(1, n_modes + 1, dtype=float)
    kk, jj = np.meshgrid(k, k, indexing="ij")
    odd = ((kk - jj) % 2) == 1
    g = np.zeros((n_modes, n_modes))
    g[odd] = -16.0 * A * kk[odd] * jj[odd] / (np.pi ** 2 * (kk[odd] ** 2 - jj[odd] ** 2) ** 2)
    return PositionMatrix(g)


def box_derivative_overlaps(n_modes: int, A: float = 0.5, nodes: int = 256) -> np.ndarray:
    """``D[j, k] = <d psi_j / dX | psi_k>`` by Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(nodes)
    X = A * x
    w = A * w
    k = np.arange(1, n_modes + 1)
    arg = np.outer(k, X + A) * np.pi / (2 * A)
    psi = np.sin(arg) / np.sqrt(A)
    dpsi = (k * np.pi / (2 * A))[:, None] * np.cos(arg) / np.sqrt(A)
    return (dpsi * w) @ psi.T


def box_b_from_overlaps(n_modes: int, A: float = 0.5, M: float = 1.0, hbar: float = 1.0,
                        nodes: int = 256) -> np.ndarray:
    """``B_jk = (hbar^2/2M) (<psi_j'|psi_k> - <psi_j|psi_k'>)`` by quadrature."""
    D = box_derivative_overlaps(n_modes, A, nodes)
    return hbar ** 2 / (2.0 * M) * (D - D.T)


# --------------------------------------------------------------------------
# mean-square displacement


def _pair_moments(moments) -> np.ndarray:
    return moments.pair if isinstance(moments, MomentReport) else np.asarray(moments, dtype=float)


def msd_curve(spectrum, g: PositionMatrix, moments, times, hbar: float = 1.0) -> Trajectory:
    """``2 sum_{j,k} E(|c_k|^2 |c_j|^2) |g_kj|^2 (1 - cos((omega_j - omega_k) t))``."""
    t = as_time_grid(times)
    pair = _pair_moments(moments)
    gm = g.g if isinstance(g, PositionMatrix) else np.asarray(g)
    n = gm.shape[0]
    if pair.shape != (n, n):
        raise StructuralError("moments and g differ in dimension")
    omega = _zeta(spectrum)[:n] / hbar
    dw = omega[None, :] - omega[:, None]
    weight = (pair * np.abs(gm) ** 2).ravel()
    # 1 - cos x = 2 sin^2(x/2), accurate at small t
    vals = 4.0 * (np.sin(0.5 * np.outer(t, dw.ravel())) ** 2) @ weight
    return Trajectory(t, vals, {"generator": "msd_curve", "truncation": n})


def _displacements(chains: np.ndarray, gm: np.ndarray, omega: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``x(t) - x(0)`` per draw, by evolving the coefficients; shape (chains, draws, times)."""
    x0 = np.einsum("...k,kj,...j->...", np.conj(chains), gm, chains).real
    out = np.empty(chains.shape[:2] + (t.size,))
    for i, ti in enumerate(t):
        u = chains * np.exp(-1j * omega * ti)
        out[..., i] = np.einsum("...k,kj,...j->...", np.conj(u), gm, u).real - x0
    return out


@dataclass
class EnsembleMSD:
    times: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray


def msd_direct(samples, spectrum, g: PositionMatrix, times, hbar: float = 1.0) -> EnsembleMSD:
    """Average ``|x(t) - x(0)|^2`` over the sample set by direct evolution."""
    t = as_time_grid(times)
    ch = _as_chains(samples)
    gm = g.g if isinstance(g, PositionMatrix) else np.asarray(g)
    omega = _zeta(spectrum)[: gm.shape[0]] / hbar
    sq = _displacements(ch, gm, omega, t) ** 2
    mean, se = _mean_se(sq)
    return EnsembleMSD(t, mean, se)


def msd_four_index(samples, spectrum, g: PositionMatrix, times, hbar: float = 1.0) -> dict:
    """Literal four-index sum over the empirical moment tensor.

    ``E{c_k^* c_j c_r c_s^*} g_kj g_rs^* [e^{i(D_kj - D_rs)t} - e^{i D_kj t} - e^{-i D_rs t} + 1]``
    with ``D_kj = omega_k - omega_j``.  The sum is also split into the
    ``k=j or r=s`` terms, the ``k=s, j=r`` pairing and the rest.
    ``difference_se`` is the standard error of (four-index minus paired
    reduction), estimated per draw so chain autocorrelation is respected.
    """
    t = as_time_grid(times)
    ch = _as_chains(samples)
    c = ch.reshape(-1, ch.shape[-1])
    gm = g.g if isinstance(g, PositionMatrix) else np.asarray(g)
    n = gm.shape[0]
    omega = _zeta(spectrum)[:n] / hbar
    M4 = np.einsum("ak,aj,ar,as->kjrs", np.conj(c), c, c, np.conj(c), optimize=True) / c.shape[0]
    G = np.einsum("kj,rs->kjrs", gm, np.conj(gm))
    D = omega[:, None] - omega[None, :]
    k, j, r, s = np.meshgrid(*(np.arange(n),) * 4, indexing="ij")
    diag_cls = (k == j) | (r == s)
    pair_cls = (k == s) & (j == r) & ~diag_cls
    total, diag_part, pair_part = [], [], []
    for ti in t:
        e1 = np.exp(1j * D * ti)
        bracket = (np.einsum("kj,rs->kjrs", e1, np.conj(e1)) - e1[:, :, None, None]
                   - np.conj(e1)[None, None, :, :] + 1.0)
        term = M4 * G * bracket
        total.append(term.sum())
        diag_part.append(term[diag_cls].sum())
        pair_part.append(term[pair_cls].sum())
    total = np.array(total)
    pair_part = np.array(pair_part)
    # per-draw |dx|^2 minus per-draw paired reduction
    direct = _displacements(ch, gm, omega, t) ** 2
    w = np.abs(ch) ** 2
    kern = 4.0 * np.sin(0.5 * np.multiply.outer(t, D)) ** 2 * np.abs(gm) ** 2
    reduced = np.einsum("abk,abj,tkj->abt", w, w, kern, optimize=True)
    diff_mean, diff_se = _mean_se(direct - reduced)
    return {"times": t, "total": total.real, "imag_residue": np.abs(total.imag),
            "diagonal_terms": np.abs(np.array(diag_part)),
            "paired_terms": pair_part.real, "unpaired_terms": (total - pair_part).real,
            "direct_mean": direct.mean(axis=(0, 1)), "difference": diff_mean,
            "difference_se": diff_se}


@dataclass
class DiffusiveWindow:
    found: bool
    t_start: float = math.nan
    t_stop: float = math.nan
    slope: float = math.nan
    r2: float = math.nan
    diffusion_constant: float = math.nan  # coefficient of t: MSD ~ D t + offset
    offset: float = math.nan
    local_slopes: np.ndarray | None = None
    message: str = ""


def diffusive_window_detect(msd: Trajectory, slope_tol: float = 0.1,
                            window_points: int | None = None) -> DiffusiveWindow:
    """Longest stretch where the log-log MSD slope stays within ``slope_tol`` of 1."""
    t, y = msd.times, msd.values
    keep = (t > 0) & (y > 0)
    t, y = t[keep], y[keep]
    if t.size < 64 or np.log10(t[-1] / t[0]) < 3:
        raise ValidationError("need >= 64 positive points spanning >= 3 decades")
    lt, ly = np.log(t), np.log(y)
    w = window_points or max(5, t.size // 32)
    half = w // 2
    centers = np.arange(half, t.size - half)
    slopes = np.array([np.polyfit(lt[c - half:c + half + 1], ly[c - half:c + half + 1], 1)[0]
                       for c in centers])
    good = np.abs(slopes - 1.0) <= slope_tol
    best, run_start, best_span = None, None, 0
    for i, ok in enumerate(np.append(good, False)):
        if ok and run_start is None:
            run_start = i
        elif not ok and run_start is not None:
            if i - run_start > best_span:
                best, best_span = (run_start, i - 1), i - run_start
            run_start = None
    if best is None:
        return DiffusiveWindow(False, local_slopes=slopes, message="none found")
    lo = centers[best[0]] - half
    hi = centers[best[1]] + half + 1
    coef = np.polyfit(lt[lo:hi], ly[lo:hi], 1)
    pred = np.polyval(coef, lt[lo:hi])
    ss_res = np.sum((ly[lo:hi] - pred) ** 2)
    ss_tot = np.sum((ly[lo:hi] - ly[lo:hi].mean()) ** 2)
    d, off = np.polyfit(t[lo:hi], y[lo:hi], 1)
    return DiffusiveWindow(True, float(t[lo]), float(t[hi - 1]), float(coef[0]),
                           float(1 - ss_res / ss_tot) if ss_tot > 0 else 1.0,
                           float(d), float(off), slopes, "window found")
