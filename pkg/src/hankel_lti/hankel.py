"""Hankel matrices, Gramians, Hankel singular values and H-infinity checks.

Hankel singular values of diagonal systems are computed from closed-form
Gramians. The Gramians of a diagonal system are Cauchy-like,

    P_jk = -b_j conj(b_k) / (a_j + conj(a_k))      (continuous)
    P_jk =  b_j conj(b_k) / (1 - a_j conj(a_k))    (discrete)

and their Schur complements stay Cauchy-like with generators updated by a
product, so a completely pivoted Cholesky factor can be built without any
subtractive cancellation. That keeps even tiny singular values accurate to
a few ulps relative to themselves, not just relative to ``sigma_1``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional, Sequence

import numpy as np
import scipy.linalg

from . import numerics
from .lti import (
    DenseStateSpace,
    DiagonalContinuousSystem,
    DiagonalDiscreteSystem,
    LTIError,
    bilinear_forward,
    transfer_continuous,
)

__all__ = [
    "HankelError",
    "PreconditionError",
    "HsvdSpectrum",
    "GramianPair",
    "GridSpec",
    "HinfEstimate",
    "PerturbationReport",
    "TightnessResult",
    "BalancedTruncation",
    "Histogram",
    "hankel_from_markov",
    "hankel_truncated",
    "gramians_diagonal",
    "cauchy_cholesky",
    "hsvd",
    "hsvd_markov",
    "eps_rank",
    "hinf_distance",
    "theorem2_bound",
    "verify_theorem2",
    "tightness_constructions",
    "verify_theorem4",
    "balanced_truncation",
    "hsv_histogram",
    "truncated_hankel_svdvals",
]

log = logging.getLogger(__name__)


class HankelError(ValueError):
    pass


class PreconditionError(HankelError):
    """A perturbation hypothesis failed; ``index`` names the offending state."""

    def __init__(self, message: str, index: Optional[int] = None):
        self.index = index
        super().__init__(message if index is None else f"{message} (index {index})")


# ---------------------------------------------------------------------------
# spectra
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class HsvdSpectrum:
    """Hankel singular values, sorted nonincreasing."""

    sigma: np.ndarray

    def __post_init__(self):
        s = np.asarray(self.sigma, dtype=float).ravel()
        if np.any(s < 0) or not np.all(np.isfinite(s)):
            raise HankelError("singular values must be finite and nonnegative")
        s = np.sort(s)[::-1].copy()
        s.flags.writeable = False
        object.__setattr__(self, "sigma", s)

    def __len__(self):
        return self.sigma.size

    @property
    def relative(self) -> np.ndarray:
        if self.sigma.size == 0 or self.sigma[0] == 0:
            raise HankelError("spectrum is identically zero")
        return self.sigma / self.sigma[0]

    def eps_rank(self, eps: float) -> int:
        return eps_rank(self, eps)

    def rows(self):
        """CSV rows ``(index, sigma, ratio)`` with 1-based index."""
        rel = self.relative
        return [(j + 1, float(s), float(r)) for j, (s, r) in enumerate(zip(self.sigma, rel))]


def eps_rank(spec, eps: float) -> int:
    """``max{j : sigma_j / sigma_1 > eps}``; ``eps = 0`` gives the exact rank, ``eps >= 1`` gives 0."""
    sigma = spec.sigma if isinstance(spec, HsvdSpectrum) else np.sort(np.asarray(spec, float))[::-1]
    if eps < 0:
        raise HankelError(f"eps must be nonnegative, got {eps}")
    if sigma.size == 0 or sigma[0] <= 0:
        raise HankelError("eps_rank of an all-zero spectrum is undefined")
    above = np.flatnonzero(sigma / sigma[0] > eps)
    return int(above[-1] + 1) if above.size else 0


# ---------------------------------------------------------------------------
# Hankel matrices
# ---------------------------------------------------------------------------

def hankel_from_markov(h, rows: Optional[int] = None) -> np.ndarray:
    """Anti-triangular Hankel matrix ``H[i, j] = h[i + j]`` if ``i + j < n`` else 0.

    ``rows`` defaults to ``n``; extra rows are zero-padded the same way.
    """
    h = numerics.as_complex_vector(h, "h")
    n = h.size
    if n < 1:
        raise HankelError("need at least one Markov parameter")
    m = n if rows is None else int(rows)
    padded = np.concatenate([h, np.zeros(m + n, dtype=complex)])
    i = np.arange(m)[:, None]
    j = np.arange(n)[None, :]
    return padded[i + j]


def _diag_discrete(sys) -> DiagonalDiscreteSystem:
    if isinstance(sys, DiagonalDiscreteSystem):
        return sys
    if isinstance(sys, DiagonalContinuousSystem):
        return bilinear_forward(sys)
    raise HankelError(f"expected a diagonal system, got {type(sys).__name__}")


class TruncatedHankel(NamedTuple):
    H: np.ndarray
    tail_bound: float


def hankel_truncated(sys, N: int) -> TruncatedHankel:
    """Leading ``N x N`` block of ``Cbar Abar^(i+j) Bbar`` with a tail bound.

    The bound is a Frobenius-norm bound on the discarded part of the
    infinite Hankel matrix, hence also a spectral-norm bound.
    """
    if N < 1:
        raise HankelError("N must be >= 1")
    if isinstance(sys, DenseStateSpace):
        if sys.continuous:
            raise HankelError("dense systems must be discrete here")
        if not sys.is_stable():
            raise HankelError("unstable system: spectral radius >= 1")
        from .lti import markov_parameters

        h = markov_parameters(sys, 2 * N - 1)
        return TruncatedHankel(scipy.linalg.hankel(h[:N], h[N - 1:]), float("nan"))
    d = _diag_discrete(sys)
    rho = float(np.abs(d.a).max())
    if rho >= 1:
        raise HankelError(f"unstable system: spectral radius {rho}")
    k = np.arange(2 * N - 1)
    h = (np.power(d.a[None, :], k[:, None]) * d.residues[None, :]).sum(axis=1)
    R = float(np.abs(d.residues).sum())
    r2 = rho * rho
    if rho == 0:
        tail = 0.0
    else:
        tail = R * rho ** N * math.sqrt((N + 1) / (1 - r2) + r2 / (1 - r2) ** 2)
    return TruncatedHankel(scipy.linalg.hankel(h[:N], h[N - 1:]), tail)


def truncated_hankel_svdvals(H: np.ndarray, rank: int, oversample: int = 16, seed: int = 0) -> np.ndarray:
    """Leading singular values of a dense matrix of known numerical rank.

    A Gaussian range finder with one re-orthogonalised power step compresses
    ``H`` to ``(rank + oversample)`` columns before an exact SVD; used to
    make 2048-square truncated Hankel matrices affordable.
    """
    gen = np.random.default_rng(seed)
    k = min(rank + oversample, min(H.shape))
    omega = gen.standard_normal((H.shape[1], k)) + 1j * gen.standard_normal((H.shape[1], k))
    Q, _ = np.linalg.qr(H @ omega)
    Q, _ = np.linalg.qr(H @ (H.conj().T @ Q))
    return np.linalg.svd(Q.conj().T @ H, compute_uv=False)[:rank]


# ---------------------------------------------------------------------------
# Gramians
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GramianPair:
    P: np.ndarray
    Q: np.ndarray
    continuous: bool = True

    def residuals(self, A, B, C) -> tuple[float, float]:
        A = np.asarray(A)
        if A.ndim == 1:
            A = np.diag(A)
        B = np.asarray(B).reshape(-1, 1)
        C = np.asarray(C).reshape(1, -1)
        P, Q = self.P, self.Q
        if self.continuous:
            rp = A @ P + P @ A.conj().T + B @ B.conj().T
            rq = A.conj().T @ Q + Q @ A + C.conj().T @ C
        else:
            rp = A @ P @ A.conj().T - P + B @ B.conj().T
            rq = A.conj().T @ Q @ A - Q + C.conj().T @ C
        return float(np.linalg.norm(rp, 2)), float(np.linalg.norm(rq, 2))


def _cauchy_denominators(x, y, continuous):
    if continuous:
        return -(x[:, None] + np.conj(y)[None, :])
    return 1.0 - x[:, None] * np.conj(y)[None, :]


def gramians_diagonal(sys) -> GramianPair:
    """Closed-form controllability/observability Gramians of a diagonal system."""
    if not isinstance(sys, (DiagonalContinuousSystem, DiagonalDiscreteSystem)):
        raise HankelError(f"expected a diagonal system, got {type(sys).__name__}")
    a, b, c = sys.a, sys.b, sys.c
    dP = _cauchy_denominators(a, a, sys.continuous)
    dQ = _cauchy_denominators(np.conj(a), np.conj(a), sys.continuous)
    scale = np.abs(dP).max()
    if np.abs(dP).min() <= 1e-14 * scale:
        j, k = np.unravel_index(np.argmin(np.abs(dP)), dP.shape)
        raise HankelError(f"near-zero Gramian denominator at ({j}, {k}): poles mirrored across the stability boundary")
    P = np.outer(b, np.conj(b)) / dP
    Q = np.outer(np.conj(c), c) / dQ
    return GramianPair(P, Q, sys.continuous)


def cauchy_cholesky(x, poles, continuous: bool = True) -> np.ndarray:
    """Pivoted Cholesky factor ``L`` (``M = L L^*``) of the Cauchy-like Gramian.

    ``M_jk = x_j conj(x_k) / -(p_j + conj(p_k))`` for continuous poles,
    ``x_j conj(x_k) / (1 - p_j conj(p_k))`` for discrete ones. Returns an
    ``n x r`` factor, ``r`` being the number of positive pivots.
    """
    x = np.array(x, dtype=complex)
    p = np.asarray(poles, dtype=complex)
    n = x.size
    L = np.zeros((n, n), dtype=complex)
    active = np.ones(n, dtype=bool)
    pd = (-2.0 * p.real) if continuous else (1.0 - np.abs(p) ** 2)
    r = 0
    for k in range(n):
        diag = np.where(active, np.abs(x) ** 2 / pd, -1.0)
        piv = int(np.argmax(diag))
        if diag[piv] <= 0:
            break
        if continuous:
            col = x * np.conj(x[piv]) / -(p + np.conj(p[piv]))
            update = (p - p[piv]) / (p + np.conj(p[piv]))
        else:
            col = x * np.conj(x[piv]) / (1.0 - p * np.conj(p[piv]))
            update = (p - p[piv]) / (1.0 - p * np.conj(p[piv]))
        col[~active] = 0.0
        L[:, k] = col / np.sqrt(diag[piv])
        active[piv] = False
        x = x * update
        x[piv] = 0.0
        r += 1
    return L[:, :r]


def _eigen_factor(M, method):
    w, V = numerics.hermitian_eigen(M, method=method)
    normM = max(abs(w[0]), abs(w[-1])) if w.size else 0.0
    if w.size and w[0] < -1e-14 * normM * max(1, w.size):
        log.warning("Gramian has a negative eigenvalue %.3e (norm %.3e); clamped", w[0], normM)
    w = np.clip(w, 0.0, None)
    return V * np.sqrt(w)


def _gramian_factors(sys, factor: str, method: str):
    if isinstance(sys, DenseStateSpace):
        A, B, C = sys.A, sys.B.reshape(-1, 1), sys.C.reshape(1, -1)
        if sys.continuous:
            P = scipy.linalg.solve_continuous_lyapunov(A, -B @ B.conj().T)
            Q = scipy.linalg.solve_continuous_lyapunov(A.conj().T, -C.conj().T @ C)
        else:
            P = scipy.linalg.solve_discrete_lyapunov(A, B @ B.conj().T)
            Q = scipy.linalg.solve_discrete_lyapunov(A.conj().T, C.conj().T @ C)
        P = 0.5 * (P + P.conj().T)
        Q = 0.5 * (Q + Q.conj().T)
        return _eigen_factor(P, method), _eigen_factor(Q, method)
    if factor == "cauchy":
        LP = cauchy_cholesky(sys.b, sys.a, sys.continuous)
        LQ = cauchy_cholesky(np.conj(sys.c), np.conj(sys.a), sys.continuous)
        return LP, LQ
    if factor == "eigen":
        g = gramians_diagonal(sys)
        return _eigen_factor(g.P, method), _eigen_factor(g.Q, method)
    raise HankelError(f"unknown factorization {factor!r}")


def hsvd(sys, factor: str = "cauchy", method: str = "jacobi") -> HsvdSpectrum:
    """Hankel singular values of a stable system.

    ``sigma_j`` are the singular values of ``L_Q^* L_P`` where ``P = L_P L_P^*``
    and ``Q = L_Q L_Q^*``. Diagonal systems use closed-form Gramians,
    factored either by the structured pivoted Cholesky (``factor="cauchy"``)
    or by a clamped Hermitian eigendecomposition (``factor="eigen"``).
    Dense systems solve the Lyapunov equations with scipy.
    """
    if isinstance(sys, DenseStateSpace):
        if not sys.is_stable():
            raise HankelError("hsvd requires a stable system")
    elif not isinstance(sys, (DiagonalContinuousSystem, DiagonalDiscreteSystem)):
        raise HankelError(f"unsupported system type {type(sys).__name__}")
    LP, LQ = _gramian_factors(sys, factor, method)
    n = sys.n
    if LP.shape[1] == 0 or LQ.shape[1] == 0:
        return HsvdSpectrum(np.zeros(n))
    s = numerics.svdvals(LQ.conj().T @ LP, method=method)
    out = np.zeros(n)
    out[: min(n, s.size)] = s[:n]
    return HsvdSpectrum(out)


def hsvd_markov(h, method: str = "jacobi") -> HsvdSpectrum:
    """Singular values of the ``n x n`` anti-triangular Hankel matrix of ``h``."""
    if hasattr(h, "h"):
        h = h.h
    return HsvdSpectrum(numerics.svdvals(hankel_from_markov(h), method=method))


# ---------------------------------------------------------------------------
# H-infinity distance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    """Frequency grid for sup-norm estimates on the imaginary axis.

    ``points_per_decade`` log-spaced points on ``[f_min, f_max]``, mirrored
    to negative frequencies, plus ``0`` (and ``z = -1`` on the circle).
    """

    f_min: float = 1e-4
    f_max: float = 1e4
    points_per_decade: int = 512
    refine_iters: int = 80
    refine_peaks: int = 3

    def __post_init__(self):
        if not self.f_min > 0:
            raise ValueError(f"f_min must be positive, got {self.f_min}")
        if not self.f_max > self.f_min:
            raise ValueError("f_max must exceed f_min")
        if self.points_per_decade < 2:
            raise ValueError("points_per_decade must be >= 2")

    def frequencies(self) -> np.ndarray:
        decades = math.log10(self.f_max / self.f_min)
        m = max(2, int(round(decades * self.points_per_decade)) + 1)
        pos = np.geomspace(self.f_min, self.f_max, m)
        return np.concatenate([-pos[::-1], [0.0], pos])


class HinfEstimate(NamedTuple):
    value: float
    frequency: float
    gap: float

    def __float__(self):
        return self.value


def _golden_max(fun, lo, hi, iters):
    invphi = (math.sqrt(5) - 1) / 2
    c = hi - invphi * (hi - lo)
    d = lo + invphi * (hi - lo)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - invphi * (hi - lo)
            fc = fun(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + invphi * (hi - lo)
            fd = fun(d)
    return (c, fc) if fc >= fd else (d, fd)


def hinf_distance(f: Callable, g: Optional[Callable] = None, grid: Optional[GridSpec] = None,
                  domain: str = "continuous") -> HinfEstimate:
    """Estimate ``sup |f - g|`` on the imaginary axis (or the unit circle).

    ``f`` and ``g`` map arrays of points to arrays of values. In the
    ``"discrete"`` domain the frequency ``w`` is sent to ``(1 + iw)/(1 - iw)``
    and ``z = -1`` is added. The grid maximum is polished by golden-section
    search around the ``refine_peaks`` best local maxima; the result is a
    lower bound on the true supremum and ``gap`` is what refinement added.
    """
    grid = grid or GridSpec()
    if domain not in ("continuous", "discrete"):
        raise ValueError(f"unknown domain {domain!r}")

    def point(w):
        s = 1j * np.asarray(w, dtype=float)
        return s if domain == "continuous" else (1 + s) / (1 - s)

    def diff(pts):
        v = np.asarray(f(pts), dtype=complex)
        if g is not None:
            v = v - np.asarray(g(pts), dtype=complex)
        return np.abs(v)

    w = grid.frequencies()
    vals = diff(point(w))
    best_val, best_w = float(vals.max()), float(w[int(vals.argmax())])
    grid_best = best_val
    if domain == "discrete":
        edge = float(diff(np.array([-1.0 + 0j]))[0])
        if edge > best_val:
            best_val, best_w, grid_best = edge, math.inf, edge
    # local maxima of the sampled curve, best first
    interior = np.flatnonzero((vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])) + 1
    candidates = list(interior[np.argsort(-vals[interior])][: grid.refine_peaks])
    for end in (0, w.size - 1):
        if vals[end] >= vals.max():
            candidates.append(end)
    for k in candidates:
        lo = w[max(k - 1, 0)]
        hi = w[min(k + 1, w.size - 1)]
        if hi <= lo:
            continue
        wk, vk = _golden_max(lambda x: float(diff(point(np.array([x])))[0]), lo, hi, grid.refine_iters)
        if vk > best_val:
            best_val, best_w = vk, wk
    return HinfEstimate(best_val, best_w, best_val - grid_best)


# ---------------------------------------------------------------------------
# perturbation theory for diagonal systems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PerturbationReport:
    delta_a: float
    delta_b: float
    bound: float
    measured: float
    tight_lower: Optional[float] = None
    slack: float = 1e-6

    @property
    def holds(self) -> bool:
        ok = self.measured <= self.bound + self.slack
        if self.tight_lower is not None:
            ok = ok and self.tight_lower <= self.measured + self.slack
        return ok


def theorem2_bound(sys: DiagonalContinuousSystem, delta_a: float, delta_b: float) -> float:
    """``4 n dA max|b_j c_j|/|Re a_j|^2 + n dB max 1/|Re a_j|``."""
    re = np.abs(sys.a.real)
    n = sys.n
    return float(4 * n * delta_a * np.max(np.abs(sys.residues) / re ** 2) + n * delta_b * np.max(1.0 / re))


def _check_perturbation(sys, pert, delta_a, delta_b, rtol=1e-12):
    if not isinstance(sys, DiagonalContinuousSystem) or not isinstance(pert, DiagonalContinuousSystem):
        raise PreconditionError("both systems must be diagonal continuous-time")
    if sys.n != pert.n:
        raise PreconditionError(f"state dimensions differ ({sys.n} vs {pert.n})")
    if delta_a < 0 or delta_b < 0:
        raise PreconditionError("perturbation sizes must be nonnegative")
    re = np.abs(sys.a.real)
    jmin = int(np.argmin(re))
    if delta_a > re[jmin] / 2 * (1 + rtol):
        raise PreconditionError(f"delta_a={delta_a:.3e} exceeds min|Re a|/2={re[jmin] / 2:.3e}", jmin)
    da = np.abs(sys.a - pert.a)
    bad = np.flatnonzero(da > delta_a * (1 + rtol) + 1e-300)
    if bad.size:
        raise PreconditionError(f"|a_j - a~_j|={da[bad[0]]:.3e} exceeds delta_a", int(bad[0]))
    r, rt = sys.residues, pert.residues
    dr = np.abs(r - rt)
    cap = np.minimum(np.abs(r), delta_b) * (1 + rtol) + 1e-300
    bad = np.flatnonzero(dr > cap)
    if bad.size:
        raise PreconditionError(f"|b_j c_j - b~_j c~_j|={dr[bad[0]]:.3e} exceeds min(|b_j c_j|, delta_b)", int(bad[0]))


def verify_theorem2(sys: DiagonalContinuousSystem, perturbed: DiagonalContinuousSystem,
                    delta_a: float, delta_b: float, grid: Optional[GridSpec] = None,
                    slack: float = 1e-6) -> PerturbationReport:
    """Check the pole/residue perturbation bound on one instance.

    The hypotheses are validated first and a :class:`PreconditionError`
    names the first offending state.
    """
    _check_perturbation(sys, perturbed, delta_a, delta_b)
    measured = hinf_distance(lambda s: transfer_continuous(sys, s),
                             lambda s: transfer_continuous(perturbed, s), grid).value
    return PerturbationReport(delta_a, delta_b, theorem2_bound(sys, delta_a, delta_b), measured, slack=slack)


@dataclass(frozen=True)
class TightnessResult:
    perturbed_a: DiagonalContinuousSystem
    perturbed_b: DiagonalContinuousSystem
    lower_a: float
    lower_b: float
    measured_a: float
    measured_b: float
    slack: float = 1e-6

    @property
    def holds(self) -> bool:
        return self.measured_a >= self.lower_a - self.slack and self.measured_b >= self.lower_b - self.slack


def tightness_constructions(sys: DiagonalContinuousSystem, delta_a: float, delta_b: float,
                            grid: Optional[GridSpec] = None, slack: float = 1e-6) -> TightnessResult:
    """Worst-case perturbations that nearly attain the bound.

    The residue of the pole closest to the axis is shifted by ``delta_b``;
    separately the pole maximising ``|b_j c_j| / |Re a_j|^2`` is moved right
    by ``delta_a``.
    """
    re = np.abs(sys.a.real)
    r = sys.residues
    if delta_a < 0 or delta_a > re.min() / 2:
        raise PreconditionError(f"delta_a must lie in [0, min|Re a|/2 = {re.min() / 2:.3e}]")
    if delta_b < 0 or delta_b > np.abs(r).min():
        raise PreconditionError(f"delta_b must lie in [0, min|b_j c_j| = {np.abs(r).min():.3e}]")
    j1 = int(np.argmax(1.0 / re))
    j2 = int(np.argmax(np.abs(r) / re ** 2))
    c_b = sys.c.copy()
    c_b[j1] = c_b[j1] + delta_b / sys.b[j1]
    pert_b = sys.replace(c=c_b)
    a_a = sys.a.copy()
    a_a[j2] = a_a[j2] + delta_a
    pert_a = sys.replace(a=a_a)
    lower_b = float(delta_b / re[j1])
    lower_a = float(delta_a * np.abs(r[j2]) / re[j2] ** 2)
    G = lambda s: transfer_continuous(sys, s)
    # peaks sit at s = i Im(a_j); make sure the grid covers them
    grid = grid or GridSpec()
    meas_b = hinf_distance(G, lambda s: transfer_continuous(pert_b, s), grid).value
    meas_a = hinf_distance(G, lambda s: transfer_continuous(pert_a, s), grid).value
    return TightnessResult(pert_a, pert_b, lower_a, lower_b, meas_a, meas_b, slack)


def verify_theorem4(h, h_tilde, grid: Optional[GridSpec] = None) -> tuple[float, float]:
    """``(measured sup |G - G~|, sqrt(n) ||h - h~||_2)`` for Markov vectors."""
    from .hope import transfer_markov

    h = numerics.as_complex_vector(getattr(h, "h", h), "h")
    ht = numerics.as_complex_vector(getattr(h_tilde, "h", h_tilde), "h_tilde")
    if h.size != ht.size:
        raise HankelError(f"length mismatch: {h.size} vs {ht.size}")
    delta = h - ht
    bound = float(math.sqrt(h.size) * np.linalg.norm(delta))
    if not np.any(delta):
        return 0.0, bound
    measured = hinf_distance(lambda z: transfer_markov(delta, 0.0, z), grid=grid, domain="discrete").value
    return measured, bound


# ---------------------------------------------------------------------------
# balanced truncation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BalancedTruncation:
    reduced: DenseStateSpace
    hsv: HsvdSpectrum
    k: int
    bound: float  # 2 * sum of discarded Hankel singular values


def balanced_truncation(sys: DiagonalContinuousSystem, k: int, method: str = "jacobi",
                        gap_tol: float = 1e-12) -> BalancedTruncation:
    """Square-root balanced truncation to order ``k``.

    The reduced model satisfies ``||G - G_k||_inf <= 2 * sum_{j>k} sigma_j``.
    A tie ``sigma_k == sigma_{k+1}`` (within ``gap_tol * sigma_1``) is
    rejected because the truncation would not be unique.
    """
    if not isinstance(sys, DiagonalContinuousSystem):
        raise HankelError("balanced_truncation expects a diagonal continuous system")
    n = sys.n
    if not 1 <= k <= n:
        raise HankelError(f"target order must satisfy 1 <= k <= {n}, got {k}")
    LP, LQ = _gramian_factors(sys, "cauchy", method)
    U, s, Vh = numerics.svd(LQ.conj().T @ LP, method=method)
    sigma = np.zeros(n)
    sigma[: min(n, s.size)] = s[:n]
    if k < n and sigma[k - 1] - sigma[k] <= gap_tol * sigma[0]:
        raise HankelError(f"repeated Hankel singular value at the cut: sigma_{k}={sigma[k - 1]:.6e}, sigma_{k + 1}={sigma[k]:.6e}")
    if sigma[k - 1] <= 0:
        raise HankelError(f"sigma_{k} is zero; the system has order < {k}")
    root = 1.0 / np.sqrt(sigma[:k])
    T = (LP @ Vh[:k].conj().T) * root
    Ti = root[:, None] * (U[:, :k].conj().T @ LQ.conj().T)
    Ar = Ti @ (sys.a[:, None] * T)
    Br = Ti @ sys.b
    Cr = sys.c @ T
    reduced = DenseStateSpace(Ar, Br, Cr, sys.d, continuous=True)
    return BalancedTruncation(reduced, HsvdSpectrum(sigma), k, float(2 * sigma[k:].sum()))


# ---------------------------------------------------------------------------
# histograms
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    counts: np.ndarray
    clamped: int
    total: int
    frac_above: float  # fraction with sigma_j / sigma_1 > 0.01


def hsv_histogram(spectra: Sequence, bins: int = 40, log_floor: float = 1e-8,
                  threshold: float = 0.01) -> Histogram:
    """Pool relative singular values into log-spaced bins on ``[log_floor, 1]``.

    Ratios below the floor are clamped into the first bin and counted in
    ``clamped``.
    """
    if bins < 1:
        raise HankelError("bins must be >= 1")
    if not 0 < log_floor < 1:
        raise HankelError("log_floor must lie in (0, 1)")
    ratios = []
    for spec in spectra:
        sig = spec.sigma if isinstance(spec, HsvdSpectrum) else np.asarray(spec, float)
        if sig.size == 0 or sig.max() <= 0:
            raise HankelError("each spectrum needs sigma_1 > 0")
        ratios.append(sig / sig.max())
    r = np.concatenate(ratios) if ratios else np.zeros(0)
    edges = np.geomspace(log_floor, 1.0, bins + 1)
    clamped = int(np.count_nonzero(r < log_floor))
    rc = np.clip(r, log_floor, 1.0)
    idx = np.clip(np.searchsorted(edges, rc, side="right") - 1, 0, bins - 1)
    counts = np.bincount(idx, minlength=bins)
    frac = float(np.count_nonzero(r > threshold) / r.size) if r.size else 0.0
    return Histogram(edges, counts, clamped, int(r.size), frac)
