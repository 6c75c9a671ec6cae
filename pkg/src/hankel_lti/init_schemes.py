"""Random and structured initializations of diagonal LTI systems.

``gamma1``  poles near the imaginary axis, residues fitted to random
            transfer-function samples.
``gamma2``  discrete poles drawn on the unit disk, mapped to continuous time.
``gamma3``  diagonalised HiPPO-LegS (the S4D construction).
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from . import numerics
from .hope import MarkovParams
from .lti import DenseStateSpace, DiagonalContinuousSystem, DiagonalDiscreteSystem, bilinear_inverse

__all__ = [
    "SchemeError",
    "Gamma1Config",
    "Gamma2Config",
    "Gamma1Result",
    "sample_gamma1",
    "fit_residues",
    "sample_gamma2",
    "hippo_legs",
    "s4d_legs_diag",
    "sample_markov",
    "sample_diagonal",
]

log = logging.getLogger(__name__)


class SchemeError(ValueError):
    pass


def _rng(seed, stream=0):
    if isinstance(seed, (numerics.SeededRng, np.random.Generator)):
        return seed
    return numerics.SeededRng(int(seed), stream)


@dataclass(frozen=True)
class Gamma2Config:
    n: int
    distribution: str = "uniform-disk"  # or "boundary-exponent"
    alpha: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise SchemeError("n must be >= 1")
        if self.distribution not in ("uniform-disk", "boundary-exponent"):
            raise SchemeError(f"unknown pole distribution {self.distribution!r}")
        if not self.alpha > 0:
            raise SchemeError(f"alpha must be positive, got {self.alpha}")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Gamma1Config:
    """Near-axis poles with ``|Re a| in [r_min, r_max]`` (log-uniform), ``Im a in [-s_max, s_max]``.

    ``N`` sample points ``i s_j`` are uniform on the same band; ``N``
    defaults to ``2 n``.
    """

    n: int
    N: Optional[int] = None
    s_max: float = 10.0
    r_min: float = 1e-3
    r_max: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise SchemeError("n must be >= 1")
        if self.N is None:
            object.__setattr__(self, "N", 2 * self.n)
        if self.N < self.n:
            raise SchemeError(f"need N >= n samples (N={self.N}, n={self.n})")
        if not 0 < self.r_min < self.r_max:
            raise SchemeError("real-part magnitudes need 0 < r_min < r_max")
        if not self.s_max > 0:
            raise SchemeError("s_max must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def sample_gamma2(cfg: Gamma2Config, rng=None) -> DiagonalContinuousSystem:
    """Disk-sampled discrete poles, Gaussian ``b c`` products, mapped to continuous time."""
    rng = _rng(cfg.seed) if rng is None else rng
    if cfg.distribution == "uniform-disk":
        abar = numerics.draw_uniform_disk(rng, cfg.n)
    else:
        abar = numerics.draw_boundary_exponent(rng, cfg.alpha, cfg.n)
    cbar = numerics._gen(rng).standard_normal(cfg.n).astype(complex)
    return bilinear_inverse(DiagonalDiscreteSystem(abar, np.ones(cfg.n), cbar, 0.0))


@dataclass(frozen=True)
class Gamma1Result:
    system: DiagonalContinuousSystem
    residual: float  # ||M c - G|| / ||G||
    rank: int
    rank_deficient: bool


def fit_residues(poles, s_points, targets, method: str = "jacobi") -> Gamma1Result:
    """Least-squares residues ``c`` (``b = 1``) with ``sum_k c_k / (i s_j - a_k) ~ G_j``."""
    a = numerics.as_complex_vector(poles, "poles")
    s = np.asarray(s_points, dtype=float).ravel()
    G = numerics.as_complex_vector(targets, "targets")
    if s.size != G.size:
        raise SchemeError("sample points and targets differ in length")
    if s.size < a.size:
        raise SchemeError(f"need at least n={a.size} samples, got {s.size}")
    M = 1.0 / (1j * s[:, None] - a[None, :])
    sol = numerics.least_squares(M, G, method=method)
    if sol.rank_deficient:
        log.warning("Cauchy matrix rank deficient (rank %d of %d); minimum-norm residues", sol.rank, a.size)
    scale = np.linalg.norm(G)
    residual = float(sol.residual_norm / scale) if scale > 0 else float(sol.residual_norm)
    sys = DiagonalContinuousSystem(a, np.ones(a.size), sol.x, 0.0)
    return Gamma1Result(sys, residual, sol.rank, sol.rank_deficient)


def sample_gamma1(cfg: Gamma1Config, rng=None, method: str = "jacobi") -> Gamma1Result:
    """Fit residues on random near-axis poles to random transfer samples."""
    rng = _rng(cfg.seed) if rng is None else rng
    g = numerics._gen(rng)
    re = -np.exp(g.uniform(math.log(cfg.r_min), math.log(cfg.r_max), cfg.n))
    im = g.uniform(-cfg.s_max, cfg.s_max, cfg.n)
    s = g.uniform(-cfg.s_max, cfg.s_max, cfg.N)
    G = numerics.draw_complex_gaussian(rng, cfg.N)
    return fit_residues(re + 1j * im, s, G, method=method)


def hippo_legs(n: int, rng=None) -> DenseStateSpace:
    """HiPPO-LegS ``(A, B)`` with a standard normal ``C``."""
    if n < 1:
        raise SchemeError("n must be >= 1")
    q = np.sqrt(2.0 * np.arange(n) + 1.0)
    A = -np.tril(np.outer(q, q), -1) - np.diag(np.arange(1.0, n + 1))
    C = numerics._gen(_rng(0) if rng is None else rng).standard_normal(n)
    return DenseStateSpace(A.astype(complex), q.astype(complex), C.astype(complex), 0.0, continuous=True)


def s4d_legs_diag(n: int, rng=None, method: str = "jacobi") -> DiagonalContinuousSystem:
    """Diagonal system from the normal part of HiPPO-LegS.

    ``A + P P^T`` with ``P_j = sqrt(2j+1)/sqrt(2)`` equals ``-I/2 + S``, ``S``
    skew-symmetric. With ``i S = V diag(mu) V^*`` the poles are
    ``-1/2 - i mu``, ``b = V^* B`` and ``c = C V``.
    """
    if n < 2 or n % 2:
        raise SchemeError(f"s4d_legs_diag needs an even n >= 2, got {n}")
    legs = hippo_legs(n, rng)
    q = np.sqrt(2.0 * np.arange(n) + 1.0)
    N = legs.A.real + 0.5 * np.outer(q, q)
    S = N + 0.5 * np.eye(n)
    S = 0.5 * (S - S.T)
    mu, V = numerics.hermitian_eigen(1j * S, method=method)
    a = -0.5 - 1j * mu
    b = V.conj().T @ legs.B
    c = legs.C @ V
    return DiagonalContinuousSystem(a, b, c, 0.0)


def sample_markov(n: int, seed=0, scale: float = 1.0, rng=None) -> MarkovParams:
    """i.i.d. real Gaussian ``h_j ~ N(0, scale^2)`` and ``d ~ N(0, 1)``."""
    if n < 1:
        raise SchemeError("n must be >= 1")
    g = numerics._gen(_rng(seed) if rng is None else rng)
    h = scale * g.standard_normal(n)
    d = g.standard_normal()
    return MarkovParams(h.astype(complex), complex(d))


def sample_diagonal(n: int, rng, re_range=(0.1, 1.0), im_max: float = 5.0) -> DiagonalContinuousSystem:
    """Generic stable test system: ``Re a`` uniform in ``-re_range``, complex Gaussian ``b``, ``c``."""
    if n < 1:
        raise SchemeError("n must be >= 1")
    g = numerics._gen(rng)
    a = -g.uniform(re_range[0], re_range[1], n) + 1j * g.uniform(-im_max, im_max, n)
    b = numerics.draw_complex_gaussian(rng, n)
    c = numerics.draw_complex_gaussian(rng, n)
    return DiagonalContinuousSystem(a, b, c, 0.0)
