"""Markov-parameter convolution kernels.

An LTI block is stored as its first ``n`` Markov parameters ``h`` and a
feedthrough ``d``. The transfer function ``G(z) = sum_j h_j z^(-j-1)`` is
sampled at unit-circle points, multiplied against the FFT of the input and
transformed back.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import numerics
from .lti import DenseStateSpace, DiagonalDiscreteSystem, LTIError, markov_parameters

__all__ = [
    "HopeError",
    "FitDivergedError",
    "MarkovParams",
    "KernelPlan",
    "FitTrajectory",
    "transfer_markov",
    "sampler_points",
    "make_plan",
    "hope_forward",
    "direct_convolution",
    "ho_kalman",
    "fit_markov",
]


class HopeError(ValueError):
    pass


class FitDivergedError(HopeError):
    pass


def _pair(z: complex) -> list[float]:
    return [float(z.real), float(z.imag)]


@dataclass(frozen=True, eq=False)
class MarkovParams:
    """Markov parameters ``h`` (length ``n``) and feedthrough ``d``."""

    h: np.ndarray
    d: complex = 0j

    def __post_init__(self):
        h = numerics.as_complex_vector(self.h, "h").copy()
        if h.size < 1:
            raise HopeError("need at least one Markov parameter")
        h.flags.writeable = False
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "d", complex(self.d))

    @property
    def n(self) -> int:
        return self.h.size

    @property
    def parameter_count(self) -> int:
        """Complex parameters of the LTI part (``d`` excluded)."""
        return self.h.size

    def __eq__(self, other):
        if not isinstance(other, MarkovParams):
            return NotImplemented
        return self.d == other.d and np.array_equal(self.h, other.h)

    def to_dict(self) -> dict:
        return {"n": self.n, "h": [_pair(z) for z in self.h], "d": _pair(self.d)}

    @classmethod
    def from_dict(cls, rec: dict) -> "MarkovParams":
        h = np.array([complex(re, im) for re, im in rec["h"]])
        if "n" in rec and int(rec["n"]) != h.size:
            raise HopeError(f"record declares n={rec['n']} but holds {h.size} parameters")
        return cls(h, complex(*rec.get("d", (0.0, 0.0))))

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "MarkovParams":
        return cls.from_dict(json.loads(text))


def transfer_markov(h, d, z) -> np.ndarray:
    """Evaluate ``d + sum_j h_j z^(-j-1)`` by Horner's rule in ``1/z``."""
    h = numerics.as_complex_vector(getattr(h, "h", h), "h")
    z = np.asarray(z, dtype=complex)
    if np.any(z == 0):
        raise HopeError(f"transfer_markov is singular at z=0 (indices {np.flatnonzero(z.ravel() == 0).tolist()})")
    w = 1.0 / z
    acc = np.zeros_like(w)
    for hj in h[::-1]:
        acc = (acc + hj) * w
    return acc + complex(d)


# ---------------------------------------------------------------------------
# samplers and plans
# ---------------------------------------------------------------------------

def sampler_points(M: int, dt: float = 1.0) -> np.ndarray:
    """Roots of unity of order ``M`` pushed through the ``1/dt`` frequency scaling.

    ``s_j = (w_j - 1)/(w_j + 1) = i tan(pi j / M)`` and the returned point is
    ``(1 + s_j/dt)/(1 - s_j/dt)``. The point ``w = -1`` (``s`` infinite)
    stays at ``-1``.
    """
    if M < 1:
        raise HopeError("transform length must be >= 1")
    if not dt > 0:
        raise HopeError(f"dt must be positive, got {dt}")
    j = np.arange(M)
    roots = np.exp(2j * np.pi * j / M)
    if dt == 1.0:
        return roots
    half = (2 * j == M)
    t = np.tan(np.pi * np.where(half, 0, j) / M) / dt
    out = (1 + 1j * t) / (1 - 1j * t)
    out[half] = -1.0
    return out


@dataclass(frozen=True, eq=False)
class KernelPlan:
    """Sampler points and transform length for one ``(n, L, dt, mode)``.

    ``tail`` bounds, over unit-norm ``h``, the periodised kernel on the
    indices that wrap back onto the first ``L`` outputs (causal mode only).
    """

    n: int
    L: int
    dt: float
    mode: str
    points: np.ndarray
    tail: float = 0.0
    fft_method: str = "native"

    @property
    def length(self) -> int:
        return self.points.size


def _kernel_basis(n: int, points: np.ndarray, fft_method: str) -> np.ndarray:
    """Row ``j`` is the sampled-and-inverted kernel of ``h = e_j``."""
    inv = 1.0 / points
    rows = np.empty((n, points.size), dtype=complex)
    cur = inv.copy()
    for j in range(n):
        rows[j] = numerics.ifft(cur, method=fft_method)
        cur = cur * inv
    return rows


def make_plan(n: int, L: int, dt: float = 1.0, mode: str = "causal", tail_tol: float = 1e-13,
              max_length: int = 1 << 20, fft_method: str = "native") -> KernelPlan:
    """Build sampler points for the forward pass.

    ``paper-exact`` uses a length-``L`` circular transform. ``causal`` zero
    pads to ``2L`` and, when ``dt != 1`` makes the kernel infinitely long,
    doubles the transform until the periodised kernel on ``(M - L, M)``,
    the part that wraps onto the kept outputs, is below ``tail_tol``
    (spectral norm over unit-norm ``h``).
    """
    if n < 1 or L < 1:
        raise HopeError("n and L must be >= 1")
    if not dt > 0:
        raise HopeError(f"dt must be positive, got {dt}")
    if mode == "paper-exact":
        if L < n:
            raise HopeError(f"paper-exact mode needs L >= n (L={L}, n={n})")
        return KernelPlan(n, L, float(dt), mode, sampler_points(L, dt), fft_method=fft_method)
    if mode != "causal":
        raise HopeError(f"unknown mode {mode!r}")
    M = 2 * L
    while True:
        pts = sampler_points(M, dt)
        basis = _kernel_basis(n, pts, fft_method)
        tail = float(np.linalg.norm(basis[:, M - L + 1:], 2)) if L > 1 else 0.0
        if tail <= tail_tol or dt == 1.0:
            return KernelPlan(n, L, float(dt), mode, pts, tail, fft_method)
        if 2 * M > max_length:
            raise HopeError(f"kernel tail {tail:.2e} still above {tail_tol:.1e} at transform length {M}")
        M *= 2


def hope_forward(params: MarkovParams, u, plan: KernelPlan) -> np.ndarray:
    """``y = iFFT(FFT(u) * G(points)) + d u`` truncated to the input length."""
    u = numerics.as_complex_vector(u, "u")
    if u.size != plan.L:
        raise HopeError(f"input length {u.size} does not match plan length {plan.L}")
    if params.n != plan.n:
        raise HopeError(f"plan built for n={plan.n}, parameters have n={params.n}")
    G = transfer_markov(params.h, 0.0, plan.points)
    padded = np.zeros(plan.length, dtype=complex)
    padded[: plan.L] = u
    y = numerics.ifft(numerics.fft(padded, method=plan.fft_method) * G, method=plan.fft_method)
    return y[: plan.L] + params.d * u


def direct_convolution(params: MarkovParams, u) -> np.ndarray:
    """Reference ``y_k = d u_k + sum_j h_j u_(k-j-1)`` in O(L n)."""
    u = numerics.as_complex_vector(u, "u")
    y = params.d * u
    for j, hj in enumerate(params.h):
        if j + 1 >= u.size:
            break
        y[j + 1:] += hj * u[: u.size - j - 1]
    return y


# ---------------------------------------------------------------------------
# realization
# ---------------------------------------------------------------------------

def ho_kalman(h, rank_tol: float = 1e-10, d: complex = 0j, method: str = "jacobi"):
    """State-space realization whose Markov parameters reproduce ``h``.

    Factors the ``(n+1) x n`` anti-triangular Hankel matrix (one extra zero
    row, so the shifted observability block carries the fact that the
    sequence stops) as ``O R`` with ``O = U S^(1/2)``; ``Abar`` solves the
    shift equation ``O[:-1] Abar = O[1:]`` in least squares. At full rank
    the realization is nilpotent and matches every ``h_j`` with zero tail.
    Order-1 results come back as a :class:`DiagonalDiscreteSystem` when
    stable, otherwise a discrete :class:`DenseStateSpace` is returned.
    """
    from .hankel import hankel_from_markov

    h = numerics.as_complex_vector(getattr(h, "h", h), "h")
    n = h.size
    if n < 1 or not np.any(h):
        raise HopeError("cannot realize an all-zero Markov sequence")
    H = hankel_from_markov(h, rows=n + 1)
    U, s, Vh = numerics.svd(H, method=method)
    r = int(np.count_nonzero(s > rank_tol * s[0]))
    root = np.sqrt(s[:r])
    O = U[:, :r] * root
    R = root[:, None] * Vh[:r]
    Abar = np.linalg.lstsq(O[:-1], O[1:], rcond=None)[0]
    Bbar = R[:, 0]
    Cbar = O[0]
    if r == 1 and abs(Abar[0, 0]) < 1:
        return DiagonalDiscreteSystem(Abar[0], Bbar, Cbar, d)
    return DenseStateSpace(Abar, Bbar, Cbar, d, continuous=False)


# ---------------------------------------------------------------------------
# kernel fitting
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FitTrajectory:
    h: np.ndarray  # (steps + 1, n)
    loss: np.ndarray  # (steps + 1,)
    lr: float

    @property
    def final(self) -> MarkovParams:
        return MarkovParams(self.h[-1])


def fit_markov(target, lr: float, steps: int, h0=None, patience: int = 10) -> FitTrajectory:
    """Gradient descent on ``0.5 * ||h - target||^2``.

    The loss is 1-smooth, so any ``0 < lr < 2`` contracts. Ten consecutive
    loss increases (``patience``) raise :class:`FitDivergedError`.
    """
    t = numerics.as_complex_vector(getattr(target, "h", target), "target")
    if not lr > 0:
        raise HopeError(f"learning rate must be positive, got {lr}")
    if steps < 0:
        raise HopeError("steps must be nonnegative")
    h = np.zeros_like(t) if h0 is None else numerics.as_complex_vector(getattr(h0, "h", h0), "h0").copy()
    if h.size != t.size:
        raise HopeError("initial point and target lengths differ")
    hs = np.empty((steps + 1, t.size), dtype=complex)
    losses = np.empty(steps + 1)
    hs[0] = h
    losses[0] = 0.5 * float(np.vdot(h - t, h - t).real)
    rising = 0
    for k in range(1, steps + 1):
        h = h - lr * (h - t)
        hs[k] = h
        losses[k] = 0.5 * float(np.vdot(h - t, h - t).real)
        rising = rising + 1 if losses[k] > losses[k - 1] else 0
        if rising >= patience:
            raise FitDivergedError(f"loss increased for {patience} consecutive steps (step {k}, lr={lr})")
    return FitTrajectory(hs, losses, float(lr))
