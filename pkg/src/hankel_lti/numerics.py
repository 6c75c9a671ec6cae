"""Dense complex linear algebra, transforms and seeded random draws.

Everything here works on small dense ``complex128`` arrays. The SVD and the
Hermitian eigensolver are Jacobi methods written on top of numpy array
arithmetic; the FFT is an iterative radix-2 transform with a Bluestein
(chirp-z) embedding for lengths that are not powers of two.

Each routine accepts ``method="lapack"`` to delegate to numpy's LAPACK
bindings instead. The Monte-Carlo drivers use that switch for large sweeps,
and the test-suite uses it as an independent cross-check.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "NumericsError",
    "SeededRng",
    "SVDResult",
    "EigResult",
    "LstsqResult",
    "as_complex_matrix",
    "as_complex_vector",
    "fft",
    "ifft",
    "svd",
    "svdvals",
    "hermitian_eigen",
    "least_squares",
    "draw_uniform_disk",
    "draw_complex_gaussian",
    "draw_boundary_exponent",
]

log = logging.getLogger(__name__)

_EPS = np.finfo(float).eps
_MAX_SWEEPS = 80


class NumericsError(ValueError):
    """Invalid input to a numerics kernel."""


def as_complex_vector(x, name="x") -> np.ndarray:
    v = np.asarray(x, dtype=complex)
    if v.ndim == 0:
        v = v.reshape(1)
    if v.ndim != 1:
        raise NumericsError(f"{name} must be one-dimensional, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericsError(f"{name} contains non-finite entries")
    return v


def as_complex_matrix(m, name="M") -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise NumericsError(f"{name} must be two-dimensional, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericsError(f"{name} contains non-finite entries")
    return a


# ---------------------------------------------------------------------------
# FFT
# ---------------------------------------------------------------------------

def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.int64)
    for _ in range(bits):
        rev = (rev << 1) | (idx & 1)
        idx >>= 1
    return rev


def _fft_pow2(x: np.ndarray, sign: int) -> np.ndarray:
    """Unnormalised radix-2 DFT with kernel exp(sign * 2 pi i jk / n)."""
    n = x.shape[-1]
    if n == 1:
        return x.copy()
    y = x[..., _bit_reverse_permutation(n)].copy()
    # twiddles from a single table; avoids accumulated phase error
    table = np.exp(sign * 2j * np.pi * np.arange(n // 2) / n)
    half = 1
    while half < n:
        span = 2 * half
        w = table[:: n // span][:half]
        y = y.reshape(*y.shape[:-1], n // span, span)
        even = y[..., :half]
        odd = y[..., half:] * w
        y = np.concatenate([even + odd, even - odd], axis=-1)
        y = y.reshape(*y.shape[:-2], n)
        half = span
    return y


def _chirp(n: int, sign: int) -> np.ndarray:
    # k^2 mod 2n keeps the phase argument small and exact in integers
    k = np.arange(n, dtype=np.int64)
    return np.exp(sign * 1j * np.pi * ((k * k) % (2 * n)) / n)


def _fft_bluestein(x: np.ndarray, sign: int) -> np.ndarray:
    n = x.shape[-1]
    m = 1 << (2 * n - 1).bit_length()
    w = _chirp(n, sign)  # exp(sign*i*pi*k^2/n)
    a = np.zeros(x.shape[:-1] + (m,), dtype=complex)
    a[..., :n] = x * w
    b = np.zeros(m, dtype=complex)
    b[:n] = np.conj(w)
    b[m - n + 1:] = np.conj(w[1:][::-1])
    conv = _fft_pow2(_fft_pow2(a, -1) * _fft_pow2(b, -1), +1) / m
    return conv[..., :n] * w


def fft(x, inverse: bool = False, method: str = "native") -> np.ndarray:
    """Discrete Fourier transform of any length.

    The forward transform is ``X_k = sum_j x_j exp(-2 pi i jk/n)``; the
    inverse carries the ``1/n`` factor, so ``fft(fft(x), inverse=True) == x``.
    Powers of two take the radix-2 path, other lengths go through Bluestein.
    The transform acts along the last axis.
    """
    a = np.asarray(x, dtype=complex)
    if a.ndim == 0 or a.shape[-1] == 0:
        raise NumericsError("fft requires a non-empty input")
    if not np.all(np.isfinite(a)):
        raise NumericsError("fft input contains non-finite entries")
    n = a.shape[-1]
    if method == "lapack" or method == "numpy":
        return np.fft.ifft(a) if inverse else np.fft.fft(a)
    sign = 1 if inverse else -1
    if n & (n - 1) == 0:
        out = _fft_pow2(a, sign)
    else:
        out = _fft_bluestein(a, sign)
    return out / n if inverse else out


def ifft(x, method: str = "native") -> np.ndarray:
    return fft(x, inverse=True, method=method)


# ---------------------------------------------------------------------------
# Jacobi SVD / Hermitian eigensolver
# ---------------------------------------------------------------------------

def _round_robin(n: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: n-1 rounds (n even) of disjoint index pairs."""
    m = n + (n % 2)
    players = list(range(m))
    rounds = []
    for _ in range(m - 1):
        p, q = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < n and b < n:
                p.append(min(a, b))
                q.append(max(a, b))
        rounds.append((np.array(p, dtype=np.int64), np.array(q, dtype=np.int64)))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


class SVDResult(NamedTuple):
    U: np.ndarray
    s: np.ndarray
    Vh: np.ndarray


class EigResult(NamedTuple):
    values: np.ndarray
    vectors: np.ndarray


def _complete_basis(Q: np.ndarray, good: np.ndarray) -> np.ndarray:
    """Replace columns of Q flagged ``~good`` by an orthonormal completion."""
    m = Q.shape[0]
    Q = Q.copy()
    basis = [Q[:, j] for j in np.flatnonzero(good)]
    cand = iter(np.eye(m, dtype=complex))
    for j in np.flatnonzero(~good):
        while True:
            v = next(cand).copy()
            for _ in range(2):
                for u in basis:
                    v -= u * np.vdot(u, v)
            nv = np.linalg.norm(v)
            if nv > 1e-6:
                break
        v /= nv
        Q[:, j] = v
        basis.append(v)
    return Q


def _one_sided_jacobi(G: np.ndarray, tol: float):
    """Orthogonalise the columns of G (m >= n); returns (G_rot, V)."""
    m, n = G.shape
    V = np.eye(n, dtype=complex)
    if n == 1:
        return G, V
    schedule = _round_robin(n)
    for sweep in range(_MAX_SWEEPS):
        rotated = False
        for p, q in schedule:
            gp, gq = G[:, p], G[:, q]
            alpha = np.einsum("ij,ij->j", gp.conj(), gp).real
            beta = np.einsum("ij,ij->j", gq.conj(), gq).real
            gamma = np.einsum("ij,ij->j", gp.conj(), gq)
            agam = np.abs(gamma)
            act = agam > tol * np.sqrt(alpha * beta)
            if not np.any(act):
                continue
            rotated = True
            p, q = p[act], q[act]
            alpha, beta, gamma, agam = alpha[act], beta[act], gamma[act], agam[act]
            phase = gamma / agam
            zeta = (beta - alpha) / (2.0 * agam)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            gp, gq = G[:, p], G[:, q] * phase.conj()
            G[:, p] = c * gp - s * gq
            G[:, q] = s * gp + c * gq
            vp, vq = V[:, p], V[:, q] * phase.conj()
            V[:, p] = c * vp - s * vq
            V[:, q] = s * vp + c * vq
        if not rotated:
            return G, V
    log.warning("one-sided Jacobi did not converge in %d sweeps", _MAX_SWEEPS)
    return G, V


def svd(M, method: str = "jacobi") -> SVDResult:
    """Thin singular value decomposition ``M = U @ diag(s) @ Vh``.

    Parameters
    ----------
    M : (m, n) array_like
        Finite complex matrix.
    method : {"jacobi", "lapack"}
        ``"jacobi"`` runs one-sided (Hestenes) Jacobi with a parallel
        round-robin ordering; ``"lapack"`` calls ``numpy.linalg.svd``.

    Returns
    -------
    SVDResult
        ``U`` is (m, k), ``s`` nonincreasing and nonnegative, ``Vh`` is
        (k, n), with ``k = min(m, n)``.
    """
    A = as_complex_matrix(M)
    m, n = A.shape
    if m == 0 or n == 0:
        k = min(m, n)
        return SVDResult(np.zeros((m, k), complex), np.zeros(k), np.zeros((k, n), complex))
    if method == "lapack":
        U, s, Vh = np.linalg.svd(A, full_matrices=False)
        return SVDResult(U, s, Vh)
    if method != "jacobi":
        raise NumericsError(f"unknown svd method {method!r}")
    if m < n:
        U, s, Vh = svd(A.conj().T, method="jacobi")
        return SVDResult(Vh.conj().T, s, U.conj().T)
    G, V = _one_sided_jacobi(A.copy(), tol=max(m, 1) * _EPS)
    s = np.linalg.norm(G, axis=0)
    order = np.argsort(-s, kind="stable")
    s, G, V = s[order], G[:, order], V[:, order]
    smax = s[0] if s.size else 0.0
    good = s > max(smax * m * _EPS, np.finfo(float).tiny)
    U = np.zeros_like(G)
    U[:, good] = G[:, good] / s[good]
    if not np.all(good):
        U = _complete_basis(U, good)
    return SVDResult(U, s, V.conj().T)


def svdvals(M, method: str = "jacobi") -> np.ndarray:
    if method == "lapack":
        return np.linalg.svd(as_complex_matrix(M), compute_uv=False)
    return svd(M, method=method).s


def hermitian_eigen(M, method: str = "jacobi", herm_tol: float = 1e-12) -> EigResult:
    """Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.

    Eigenvalues come back real and sorted ascending; eigenvector ``k`` is
    column ``k`` of ``vectors``. Inputs whose Hermitian defect
    ``||M - M^*|| / ||M||`` exceeds ``herm_tol`` are rejected.
    """
    A = as_complex_matrix(M)
    n, n2 = A.shape
    if n != n2:
        raise NumericsError(f"hermitian_eigen needs a square matrix, got {A.shape}")
    scale = np.linalg.norm(A)
    defect = np.linalg.norm(A - A.conj().T) / scale if scale > 0 else 0.0
    if defect > herm_tol:
        raise NumericsError(f"matrix is not Hermitian (relative defect {defect:.3e})")
    A = 0.5 * (A + A.conj().T)
    if method == "lapack":
        w, V = np.linalg.eigh(A)
        return EigResult(w, V)
    if method != "jacobi":
        raise NumericsError(f"unknown eigen method {method!r}")
    V = np.eye(n, dtype=complex)
    if n > 1 and scale > 0:
        schedule = _round_robin(n)
        tol = _EPS * scale
        for sweep in range(_MAX_SWEEPS):
            if np.linalg.norm(A - np.diag(np.diag(A))) <= tol:
                break
            for p, q in schedule:
                apq = A[p, q]
                mag = np.abs(apq)
                act = mag > _EPS * 1e-3 * scale
                if not np.any(act):
                    continue
                p, q, apq, mag = p[act], q[act], apq[act], mag[act]
                app, aqq = A[p, p].real, A[q, q].real
                phase = apq / mag
                zeta = (aqq - app) / (2.0 * mag)
                t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                # columns: A <- A W with W = [[c, s], [-s e^{-i phi}, c e^{-i phi}]]
                cp, cq = A[:, p], A[:, q] * phase.conj()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp, rq = A[p, :], A[q, :] * phase[:, None]
                A[p, :] = c[:, None] * rp - s[:, None] * rq
                A[q, :] = s[:, None] * rp + c[:, None] * rq
                A[q, p] = 0.0
                A[p, q] = 0.0
                vp, vq = V[:, p], V[:, q] * phase.conj()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
        else:
            log.warning("Jacobi eigensolver did not converge in %d sweeps", _MAX_SWEEPS)
    w = np.diag(A).real.copy()
    order = np.argsort(w, kind="stable")
    return EigResult(w[order], V[:, order])


@dataclass(frozen=True)
class LstsqResult:
    x: np.ndarray
    rank: int
    residual_norm: float
    rank_deficient: bool


def least_squares(M, rhs, rcond: float | None = None, method: str = "jacobi") -> LstsqResult:
    """Minimum-norm least-squares solution of ``M x ~ rhs`` via the SVD.

    Singular values below ``rcond * s[0]`` (default ``max(m, n) * eps``) are
    treated as zero. A rank-deficient ``M`` is not an error: the
    minimum-norm solution is returned with ``rank_deficient=True`` and
    ``rank`` set to the effective rank.
    """
    A = as_complex_matrix(M)
    b = as_complex_vector(rhs, "rhs")
    m, n = A.shape
    if m < n:
        raise NumericsError(f"least_squares needs rows >= cols, got {A.shape}")
    if b.shape[0] != m:
        raise NumericsError(f"rhs length {b.shape[0]} does not match {m} rows")
    U, s, Vh = svd(A, method=method)
    if rcond is None:
        rcond = max(m, n) * _EPS
    keep = s > rcond * (s[0] if s.size else 0.0)
    rank = int(np.count_nonzero(keep))
    coef = (U[:, keep].conj().T @ b) / s[keep]
    x = Vh[keep].conj().T @ coef
    res = float(np.linalg.norm(A @ x - b))
    deficient = rank < n
    if deficient:
        log.warning("least_squares: rank-deficient matrix (effective rank %d of %d)", rank, n)
    return LstsqResult(x, rank, res, deficient)


# ---------------------------------------------------------------------------
# Random draws
# ---------------------------------------------------------------------------

class SeededRng:
    """Counter-based random stream identified by ``(seed, stream)``.

    Backed by numpy's Philox bit generator with the two 64-bit key words set
    to the seed and the stream id, so trial ``k`` of an experiment can build
    its own generator without touching any shared state.
    """

    def __init__(self, seed: int, stream: int = 0):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self.stream = int(stream) & 0xFFFFFFFFFFFFFFFF
        key = np.array([self.seed, self.stream], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, stream: int) -> "SeededRng":
        # mixes the parent stream id in so nested splits stay distinct
        return SeededRng(self.seed, (self.stream * 0x9E3779B97F4A7C15 + stream + 1) & 0xFFFFFFFFFFFFFFFF)

    def __repr__(self):
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


def _gen(rng) -> np.random.Generator:
    if isinstance(rng, SeededRng):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected SeededRng or numpy Generator, got {type(rng).__name__}")


def draw_uniform_disk(rng, size=None):
    """Points uniform (by area) on the open unit disk."""
    g = _gen(rng)
    r = np.sqrt(g.random(size))
    theta = 2.0 * np.pi * g.random(size)
    return r * np.exp(1j * theta)


def draw_complex_gaussian(rng, size=None):
    """Standard complex normal: real and imaginary parts i.i.d. N(0, 1/2)."""
    g = _gen(rng)
    return (g.standard_normal(size) + 1j * g.standard_normal(size)) / np.sqrt(2.0)


def draw_boundary_exponent(rng, alpha: float, size=None):
    """Points with modulus ``1 - v**(1/alpha)``, ``v ~ U(0,1)``, uniform angle.

    ``P(|z| > 1 - rho) = rho**alpha`` exactly, which gives the boundary
    concentration exponent ``alpha``.
    """
    if not alpha > 0:
        raise NumericsError(f"alpha must be positive, got {alpha}")
    g = _gen(rng)
    # 1 - U(0,1] keeps v strictly positive so |z| < 1
    v = 1.0 - g.random(size)
    r = 1.0 - v ** (1.0 / alpha)
    theta = 2.0 * np.pi * g.random(size)
    return r * np.exp(1j * theta)
