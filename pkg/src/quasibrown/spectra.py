"""Eigenvalue sets for the droplet-plus-grain toy model.

Energies are truncated by cutoff, never by count.  The heavy particle sits
at ``X`` in ``(-A, A)``; light particles to its right (``x > X``) and left
(``x < X``) are hard-wall separated from it.  ``sides="both"`` puts ``N``
light particles on each side, ``sides="right"`` puts ``N`` on the right
only (the ``N = 1`` case is the triangle drum).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from ._validation import check_positive
from .exceptions import SpectrumError, ValidationError
from .lanczos import ITERATION_BUDGET, RESIDUAL_TOL, lowest_eigenpairs
from .signals import STALL_TOL, sum_verdict, tail_behaviour

SOURCES = ("analytic-rectangle", "immersed", "surrounding", "triangle-numeric",
           "rectangle-numeric", "sum-of-squares", "supplied")


@dataclass
class SpectrumModel:
    eigenvalues: np.ndarray
    labels: list | None = None
    source: str = "supplied"

    def __post_init__(self):
        ev = np.atleast_1d(np.asarray(self.eigenvalues, dtype=float))
        if ev.ndim != 1:
            raise ValidationError("eigenvalues must be 1-D")
        if ev.size and (np.any(ev <= 0) or not np.all(np.isfinite(ev))):
            raise ValidationError("eigenvalues must be positive and finite")
        if np.any(np.diff(ev) < 0):
            raise ValidationError("eigenvalues must be ascending")
        if self.labels is not None and len(self.labels) != ev.size:
            raise ValidationError("labels and eigenvalues differ in length")
        self.eigenvalues = ev

    def __len__(self):
        return self.eigenvalues.size


@dataclass(frozen=True)
class BoxGeometry:
    A: float = 0.5
    B: float | None = None
    C: float | None = None
    N: int = 1
    m: float = 1.0
    M: float = 1.0
    hbar: float = 1.0
    sides: str = "both"

    def __post_init__(self):
        for name in ("A", "m", "M", "hbar"):
            check_positive(getattr(self, name), name)
        if self.B is None:
            object.__setattr__(self, "B", -self.A / 3.0)
        if self.C is None:
            object.__setattr__(self, "C", self.A / 3.0)
        if not (-self.A < self.B < self.C < self.A):
            raise ValidationError("require -A < B < C < A")
        if int(self.N) < 1:
            raise ValidationError("N must be >= 1")
        if self.sides not in ("both", "right"):
            raise ValidationError("sides must be 'both' or 'right'")

    def _names(self):
        names = [f"nR{j + 1}" for j in range(self.N)]
        if self.sides == "both":
            names += [f"nL{j + 1}" for j in range(self.N)]
        return names + ["nX"]

    def _coefficients(self, lengths: dict) -> list[float]:
        """Energy per unit n^2 for every quantum number, in label order."""
        kin = (self.hbar * math.pi) ** 2
        light = kin / (2 * self.m)
        coefs = [light / lengths["R"] ** 2] * self.N
        if self.sides == "both":
            coefs += [light / lengths["L"] ** 2] * self.N
        return coefs + [kin / (2 * self.M) / lengths["X"] ** 2]

    def surrounding_lengths(self):
        w = 2 * self.A
        return {"R": w, "L": w, "X": w}

    def immersed_lengths(self):
        return {"R": self.A - self.C, "L": self.B + self.A, "X": self.C - self.B}


def _enumerate_levels(coefs: Sequence[float], cutoff: float):
    coefs = list(coefs)
    rest = np.concatenate([np.cumsum(coefs[::-1])[::-1], [0.0]])
    found = []

    def rec(i, prefix, energy):
        if i == len(coefs):
            found.append((energy, tuple(prefix)))
            return
        n = 1
        while energy + coefs[i] * n * n + rest[i + 1] <= cutoff:
            rec(i + 1, prefix + [n], energy + coefs[i] * n * n)
            n += 1

    rec(0, [], 0.0)
    found.sort(key=lambda item: (item[0], item[1]))
    return found


def _rectangle_spectrum(geom: BoxGeometry, lengths: dict, cutoff: float, source: str) -> SpectrumModel:
    coefs = geom._coefficients(lengths)
    ground = float(sum(coefs))
    if not cutoff >= ground:
        raise SpectrumError(f"cutoff {cutoff!r} is below the ground state {ground!r}")
    levels = _enumerate_levels(coefs, cutoff)
    names = geom._names()
    labels = [dict(zip(names, idx)) for _, idx in levels]
    return SpectrumModel(np.array([e for e, _ in levels]), labels, source)


def surrounding_rectangle_spectrum(geom: BoxGeometry, cutoff: float) -> SpectrumModel:
    """All surrounding-box eigenvalues up to ``cutoff`` (lower bounds)."""
    return _rectangle_spectrum(geom, geom.surrounding_lengths(), cutoff, "surrounding")


def immersed_rectangle_spectrum(geom: BoxGeometry, cutoff: float) -> SpectrumModel:
    """All immersed-box eigenvalues up to ``cutoff`` (upper bounds)."""
    return _rectangle_spectrum(geom, geom.immersed_lengths(), cutoff, "immersed")


def level_energy(geom: BoxGeometry, label: dict, which: str = "surrounding") -> float:
    lengths = geom.surrounding_lengths() if which == "surrounding" else geom.immersed_lengths()
    coefs = geom._coefficients(lengths)
    return float(sum(c * label[name] ** 2 for c, name in zip(coefs, geom._names())))


# --------------------------------------------------------------------------
# finite differences on the stretched triangle


@dataclass(frozen=True)
class TriangleGrid:
    """Aligned grid on the stretched triangle of the single-light-particle model.

    In ``y = sqrt(2m)/hbar x``, ``Y = sqrt(2M)/hbar X`` the region ``x > X``
    becomes a right triangle with legs ``2A sqrt(2M)/hbar`` (along Y) and
    ``2A sqrt(2m)/hbar`` (along y).  Each leg is cut into ``n`` intervals, so
    hypotenuse nodes fall exactly on the boundary.
    """

    m: float = 1.0
    M: float = 1.0
    A: float = 0.5
    hbar: float = 1.0
    n: int = 32

    def __post_init__(self):
        for name in ("m", "M", "A", "hbar"):
            check_positive(getattr(self, name), name)
        if int(self.n) < 3:
            raise ValidationError("need n >= 3 intervals per leg")

    @classmethod
    def isoceles(cls, leg: float = 1.0, n: int = 32) -> "TriangleGrid":
        # legs 2A sqrt(2) = leg with m = M = hbar = 1
        return cls(1.0, 1.0, leg / (2.0 * math.sqrt(2.0)), 1.0, n)

    @property
    def legs(self) -> tuple[float, float]:
        return (2 * self.A * math.sqrt(2 * self.M) / self.hbar,
                2 * self.A * math.sqrt(2 * self.m) / self.hbar)

    @property
    def spacings(self) -> tuple[float, float]:
        lu, lv = self.legs
        return lu / self.n, lv / self.n

    @property
    def h(self) -> float:
        return max(self.spacings)

    @property
    def mask(self) -> np.ndarray:
        i, j = np.meshgrid(np.arange(self.n + 1), np.arange(self.n + 1), indexing="ij")
        return (i >= 1) & (j >= 1) & (i + j < self.n)

    def refined(self, factor: int = 2) -> "TriangleGrid":
        return TriangleGrid(self.m, self.M, self.A, self.hbar, self.n * factor)

    def geometry(self, B=None, C=None) -> BoxGeometry:
        return BoxGeometry(self.A, B, C, 1, self.m, self.M, self.hbar, "right")


def dirichlet_matrix(mask: np.ndarray, hu: float, hv: float) -> sp.csr_matrix:
    """5-point ``-(d_uu + d_vv)`` on the masked nodes, zero Dirichlet data elsewhere."""
    index = -np.ones(mask.shape, dtype=np.int64)
    nodes = np.argwhere(mask)
    index[mask] = np.arange(nodes.shape[0])
    cu, cv = 1.0 / hu ** 2, 1.0 / hv ** 2
    rows = [np.arange(nodes.shape[0])]
    cols = [np.arange(nodes.shape[0])]
    vals = [np.full(nodes.shape[0], 2 * cu + 2 * cv)]
    for (di, dj), c in (((1, 0), cu), ((-1, 0), cu), ((0, 1), cv), ((0, -1), cv)):
        ni, nj = nodes[:, 0] + di, nodes[:, 1] + dj
        inside = (ni >= 0) & (ni < mask.shape[0]) & (nj >= 0) & (nj < mask.shape[1])
        nb = np.full(nodes.shape[0], -1)
        nb[inside] = index[ni[inside], nj[inside]]
        ok = nb >= 0
        rows.append(np.nonzero(ok)[0])
        cols.append(nb[ok])
        vals.append(np.full(ok.sum(), -c))
    n = nodes.shape[0]
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n, n))


@dataclass
class DirichletResult:
    spectrum: SpectrumModel
    h: np.ndarray              # spacing per level
    raw: np.ndarray            # (levels, k) discrete eigenvalues
    extrapolated: np.ndarray   # (levels - 1, k) Richardson estimates
    error_indicator: np.ndarray  # (levels - 1, k) |lam_{h/2} - lam_h| / 3
    residuals: np.ndarray

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.spectrum.eigenvalues

    def table(self) -> list[dict]:
        rows = []
        for lvl in range(self.raw.shape[0]):
            row = {"h": float(self.h[lvl])}
            for i, v in enumerate(self.raw[lvl]):
                row[f"lambda_{i + 1}"] = float(v)
            if lvl >= 1:
                for i in range(self.raw.shape[1]):
                    row[f"extrap_{i + 1}"] = float(self.extrapolated[lvl - 1, i])
                    row[f"indicator_{i + 1}"] = float(self.error_indicator[lvl - 1, i])
            rows.append(row)
        return rows


def _richardson(masks_and_spacings, k, source, tol, max_iter) -> DirichletResult:
    raw, hs, res = [], [], []
    for mask, hu, hv in masks_and_spacings:
        if mask.sum() < k:
            raise ValidationError(f"grid has {mask.sum()} interior nodes, fewer than k={k}")
        out = lowest_eigenpairs(dirichlet_matrix(mask, hu, hv), k, tol=tol, max_iter=max_iter)
        raw.append(out.eigenvalues)
        res.append(out.residuals)
        hs.append(max(hu, hv))
    raw = np.array(raw)
    if raw.shape[0] < 2:
        extrap = np.empty((0, k))
        ind = np.empty((0, k))
        final = raw[-1]
    else:
        extrap = (4.0 * raw[1:] - raw[:-1]) / 3.0
        ind = np.abs(raw[1:] - raw[:-1]) / 3.0
        final = extrap[-1]
    spectrum = SpectrumModel(np.sort(final), None, source)
    return DirichletResult(spectrum, np.array(hs), raw, extrap, ind, np.array(res))


def triangle_dirichlet_eigs(grid: TriangleGrid, k: int, refinements: int = 2,
                            tol: float = RESIDUAL_TOL, max_iter: int = ITERATION_BUDGET) -> DirichletResult:
    """Lowest ``k`` Dirichlet eigenvalues of the stretched triangle.

    Solves on ``grid`` and ``refinements`` successive halvings of ``h`` and
    Richardson-extrapolates consecutive pairs assuming ``O(h^2)`` error.  The
    reported spectrum is the finest extrapolation; its error indicator is
    the matching ``|lam_{h/2} - lam_h| / 3``.
    """
    if k < 1:
        raise ValidationError("k must be >= 1")
    levels = []
    g = grid
    for _ in range(refinements + 1):
        hu, hv = g.spacings
        levels.append((g.mask, hu, hv))
        g = g.refined()
    return _richardson(levels, k, "triangle-numeric", tol, max_iter)


def rectangle_dirichlet_eigs(width: float, height: float, n: int, k: int, refinements: int = 2,
                             tol: float = RESIDUAL_TOL, max_iter: int = ITERATION_BUDGET) -> DirichletResult:
    """Same solver on a ``width x height`` rectangle (self-test against exact modes)."""
    levels = []
    for r in range(refinements + 1):
        nn = n * 2 ** r
        mask = np.zeros((nn + 1, nn + 1), dtype=bool)
        mask[1:nn, 1:nn] = True
        levels.append((mask, width / nn, height / nn))
    return _richardson(levels, k, "rectangle-numeric", tol, max_iter)


def rectangle_exact(width: float, height: float, k: int) -> np.ndarray:
    """Lowest ``k`` Dirichlet eigenvalues ``pi^2 (p^2/w^2 + q^2/h^2)``."""
    pmax = k + 1
    p, q = np.meshgrid(np.arange(1, pmax + 1), np.arange(1, pmax + 1))
    vals = np.pi ** 2 * (p ** 2 / width ** 2 + q ** 2 / height ** 2)
    return np.sort(vals.ravel())[:k]


# --------------------------------------------------------------------------
# sums of inverse eigenvalues


@dataclass
class InverseSumReport:
    index: np.ndarray         # cube side K (families) or term count (spectra)
    partial_sums: np.ndarray
    fit: dict
    verdict: str              # "convergent" | "divergent" | "inconclusive"
    budget: int
    rationale: str = ""
    extra: dict = field(default_factory=dict)


def _linear_fit(x, y):
    coef = np.polyfit(x, y, 1)
    pred = np.polyval(coef, x)
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(coef[0]), float(coef[1]), r2


def _fit_window(K: np.ndarray) -> np.ndarray:
    lo = max(10, int(K[-1] // 100))
    return K >= lo


def sum_of_squares_partial_sums(dims: int, budget: int) -> tuple[np.ndarray, np.ndarray]:
    """``S(K) = sum over [1, K]^dims of 1/(k_1^2 + ... + k_dims^2)``.

    ``budget`` caps the number of lattice points, so ``K <= budget^(1/dims)``.
    """
    if dims < 1:
        raise ValidationError("dims must be >= 1")
    kmax = int(math.floor(budget ** (1.0 / dims) + 1e-9))
    if kmax < 2:
        raise ValidationError("budget too small for this dimension")
    sq = np.arange(1, kmax + 1, dtype=float) ** 2
    if dims == 1:
        return np.arange(1, kmax + 1), np.cumsum(1.0 / sq)
    total = sq
    for _ in range(dims - 1):
        total = np.add.outer(total, sq)
    cube = 1.0 / total
    for ax in range(dims):
        cube = np.cumsum(cube, axis=ax)
    diag = cube[tuple(np.arange(kmax) for _ in range(dims))]
    return np.arange(1, kmax + 1), diag


def inverse_eigenvalue_sum(spectrum=None, dims: int | None = None, budget: int = 10 ** 6,
                           growth_window: int = 10, stall_tol: float = STALL_TOL) -> InverseSumReport:
    """Partial sums of ``1/zeta`` with a growth fit and a divergence verdict.

    Pass ``dims`` for the sum-of-squares family ``1/(k_1^2+...+k_N^2)`` over
    growing cubes (log fit for N = 2, power law for N >= 3, ``S_inf - c/K``
    for N = 1), or ``spectrum`` (a :class:`SpectrumModel`, array, or callable
    ``k -> zeta_k``) for ``sum_k 1/zeta_k`` over its first ``budget`` terms.
    """
    if budget < 100:
        raise ValidationError("budget must be >= 100")
    if (spectrum is None) == (dims is None):
        raise ValidationError("pass exactly one of spectrum or dims")
    if dims is not None:
        K, S = sum_of_squares_partial_sums(dims, budget)
        sel = _fit_window(K)
        if dims == 1:
            slope, icpt, r2 = _linear_fit(1.0 / K[sel], S[sel])
            fit = {"model": "S_inf - c/K", "S_inf": icpt, "c": -slope, "r2": r2}
        elif dims == 2:
            slope, icpt, r2 = _linear_fit(np.log(K[sel]), S[sel])
            fit = {"model": "a + b ln K", "a": icpt, "b": slope, "r2": r2}
        else:
            slope, icpt, r2 = _linear_fit(np.log(K[sel]), np.log(S[sel]))
            fit = {"model": "c K^p", "p": slope, "c": math.exp(icpt), "r2": r2}
        tail = tail_behaviour(S, growth_window, stall_tol)
        return InverseSumReport(K, S, fit, sum_verdict(S, growth_window, stall_tol), budget,
                                f"cube family N={dims}, K<= {K[-1]}; decay exponent {tail.decay_exponent:.3g}, "
                                f"relative rise {tail.relative_increase:.3g}")
    if callable(spectrum):
        zeta = np.asarray(spectrum(np.arange(1, budget + 1)), dtype=float)
    else:
        zeta = spectrum.eigenvalues if isinstance(spectrum, SpectrumModel) else np.asarray(spectrum, float)
        zeta = np.sort(zeta)[:budget]
    if np.any(zeta <= 0):
        raise ValidationError("eigenvalues must be positive")
    S = np.cumsum(1.0 / zeta)
    n = np.arange(1, S.size + 1)
    tail = tail_behaviour(S, growth_window, stall_tol)
    sel = _fit_window(n)
    slope, icpt, r2 = _linear_fit(np.log(n[sel]), S[sel])
    fit = {"model": "a + b ln n", "a": icpt, "b": slope, "r2": r2}
    return InverseSumReport(n, S, fit, sum_verdict(S, growth_window, stall_tol), S.size,
                            f"{S.size} terms; decay exponent {tail.decay_exponent:.3g}, "
                            f"relative rise {tail.relative_increase:.3g}")


def sum_of_squares_spectrum(dims: int, count: int) -> SpectrumModel:
    """Lowest ``count`` values of ``k_1^2 + ... + k_dims^2`` (k_i >= 1), with multiplicity."""
    kmax = 2
    while True:
        sq = np.arange(1, kmax + 1) ** 2
        total = sq
        for _ in range(dims - 1):
            total = np.add.outer(total, sq)
        vals = np.sort(total.ravel())
        # every value <= kmax^2 + (dims-1) is complete once kmax is reached
        complete = vals[vals <= kmax ** 2 + dims - 1]
        if complete.size >= count:
            return SpectrumModel(complete[:count].astype(float), None, "sum-of-squares")
        kmax *= 2
