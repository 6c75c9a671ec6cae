"""Single-input single-output LTI systems in diagonal and dense form.

Continuous systems ``x' = Ax + Bu, y = Cx + Du`` and discrete systems
``x[k+1] = Ax[k] + Bu[k], y[k] = Cx[k] + Du[k]`` are related by the
unit-step bilinear transform

    Abar = (I + A)(I - A)^-1,  Bbar = (I + Abar) B / sqrt(2),
    Cbar = C (I + Abar) / sqrt(2),  Dbar = D + Cbar (I + Abar)^-1 Bbar,

under which ``G(s) = Gbar((1 + s) / (1 - s))``. A step size only enters
through :func:`time_scale`, which realises ``G(s / dt)``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .numerics import as_complex_matrix, as_complex_vector

__all__ = [
    "LTIError",
    "PoleError",
    "DiagonalContinuousSystem",
    "DiagonalDiscreteSystem",
    "DenseStateSpace",
    "bilinear_forward",
    "bilinear_inverse",
    "transfer_continuous",
    "transfer_discrete",
    "transfer",
    "simulate_recurrence",
    "time_scale",
    "impulse_response",
    "markov_parameters",
    "to_dense",
    "system_to_dict",
    "system_from_dict",
    "dumps_system",
    "loads_system",
]

_SQRT2 = np.sqrt(2.0)
_SING_TOL = 1e-14


class LTIError(ValueError):
    pass


class PoleError(LTIError):
    """Transfer function evaluated on (or numerically at) a pole."""

    def __init__(self, indices):
        self.indices = list(int(i) for i in indices)
        super().__init__(f"evaluation point(s) at a pole: indices {self.indices}")


def _scalar(x) -> complex:
    return complex(np.asarray(x, dtype=complex).reshape(()))


@dataclass(frozen=True, eq=False)
class _Diagonal:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: complex = 0j

    def __post_init__(self):
        a = as_complex_vector(self.a, "a")
        b = as_complex_vector(self.b, "b")
        c = as_complex_vector(self.c, "c")
        if a.size < 1:
            raise LTIError("a system needs at least one state")
        if not (a.shape == b.shape == c.shape):
            raise LTIError(f"a, b, c lengths differ: {a.size}, {b.size}, {c.size}")
        for name, arr in (("a", a), ("b", b), ("c", c)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "d", _scalar(self.d))
        self._check_stable()

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def residues(self) -> np.ndarray:
        return self.b * self.c

    def replace(self, **kw):
        fields = {"a": self.a, "b": self.b, "c": self.c, "d": self.d}
        fields.update(kw)
        return type(self)(**fields)

    def __eq__(self, other):
        return (
            type(self) is type(other)
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.c, other.c)
            and self.d == other.d
        )

    __hash__ = None


class DiagonalContinuousSystem(_Diagonal):
    """Diagonal continuous-time system; ``c`` holds the entries of ``C^T``."""

    continuous = True

    def _check_stable(self):
        bad = np.flatnonzero(self.a.real >= 0)
        if bad.size:
            raise LTIError(f"unstable continuous system: Re(a_j) >= 0 at j={bad.tolist()}")


class DiagonalDiscreteSystem(_Diagonal):
    """Diagonal discrete-time system with poles inside the unit disk."""

    continuous = False

    def _check_stable(self):
        bad = np.flatnonzero(np.abs(self.a) >= 1)
        if bad.size:
            raise LTIError(f"unstable discrete system: |a_j| >= 1 at j={bad.tolist()}")


@dataclass(frozen=True, eq=False)
class DenseStateSpace:
    """Dense SISO realization ``(A, B, C, D)``.

    ``B`` is stored as a length-n vector and ``C`` as a length-n row.
    Stability is only checked when ``check_stable`` is set.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: complex = 0j
    continuous: bool = True
    check_stable: bool = field(default=False, repr=False)

    def __post_init__(self):
        A = as_complex_matrix(self.A, "A")
        B = as_complex_vector(np.ravel(self.B), "B")
        C = as_complex_vector(np.ravel(self.C), "C")
        n = A.shape[0]
        if A.shape != (n, n) or B.size != n or C.size != n:
            raise LTIError(f"inconsistent shapes A{A.shape}, B({B.size}), C({C.size})")
        for name, arr in (("A", A), ("B", B), ("C", C)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "D", _scalar(self.D))
        if self.check_stable and not self.is_stable():
            kind = "spectral abscissa" if self.continuous else "spectral radius"
            raise LTIError(f"unstable dense system ({kind} {self.stability_margin():.3e})")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def poles(self) -> np.ndarray:
        return np.linalg.eigvals(self.A)

    def stability_margin(self) -> float:
        lam = self.poles()
        return float(lam.real.max()) if self.continuous else float(np.abs(lam).max())

    def is_stable(self) -> bool:
        m = self.stability_margin()
        return m < 0 if self.continuous else m < 1


System = Union[DiagonalContinuousSystem, DiagonalDiscreteSystem, DenseStateSpace]


def to_dense(sys) -> DenseStateSpace:
    if isinstance(sys, DenseStateSpace):
        return sys
    return DenseStateSpace(np.diag(sys.a), sys.b, sys.c, sys.d, continuous=sys.continuous)


# ---------------------------------------------------------------------------
# bilinear transform
# ---------------------------------------------------------------------------

def bilinear_forward(sys):
    """Continuous -> discrete bilinear transform (unit step)."""
    if not sys.continuous:
        raise LTIError("bilinear_forward expects a continuous-time system")
    if isinstance(sys, DenseStateSpace):
        I = np.eye(sys.n)
        M = I - sys.A
        if np.linalg.cond(M) > 1 / _SING_TOL:
            raise LTIError("I - A is singular; 1 is an eigenvalue of A")
        Ab = np.linalg.solve(M, I + sys.A)
        Bb = (I + Ab) @ sys.B / _SQRT2
        Cb = sys.C @ (I + Ab) / _SQRT2
        Db = sys.D + Cb @ np.linalg.solve(I + Ab, Bb)
        return DenseStateSpace(Ab, Bb, Cb, Db, continuous=False)
    den = 1.0 - sys.a
    bad = np.flatnonzero(np.abs(den) < _SING_TOL)
    if bad.size:
        raise LTIError(f"I - A is singular at j={bad.tolist()}")
    ab = (1.0 + sys.a) / den
    bb = (1.0 + ab) * sys.b / _SQRT2
    cb = sys.c * (1.0 + ab) / _SQRT2
    db = sys.d + np.sum(cb * bb / (1.0 + ab))
    return DiagonalDiscreteSystem(ab, bb, cb, db)


def bilinear_inverse(sys):
    """Discrete -> continuous; exact inverse of :func:`bilinear_forward`."""
    if sys.continuous:
        raise LTIError("bilinear_inverse expects a discrete-time system")
    if isinstance(sys, DenseStateSpace):
        I = np.eye(sys.n)
        M = I + sys.A
        if np.linalg.cond(M) > 1 / _SING_TOL:
            raise LTIError("I + Abar is singular; -1 is an eigenvalue of Abar")
        A = np.linalg.solve(M, sys.A - I)
        B = _SQRT2 * np.linalg.solve(M, sys.B)
        C = _SQRT2 * np.linalg.solve(M.T, sys.C)
        D = sys.D - sys.C @ np.linalg.solve(M, sys.B)
        return DenseStateSpace(A, B, C, D, continuous=True)
    den = 1.0 + sys.a
    bad = np.flatnonzero(np.abs(den) < _SING_TOL)
    if bad.size:
        raise LTIError(f"I + Abar is singular at j={bad.tolist()}")
    a = (sys.a - 1.0) / den
    b = _SQRT2 * sys.b / den
    c = _SQRT2 * sys.c / den
    d = sys.d - np.sum(sys.c * sys.b / den)
    return DiagonalContinuousSystem(a, b, c, d)


# ---------------------------------------------------------------------------
# transfer functions
# ---------------------------------------------------------------------------

def _resolvent_eval(sys, pts: np.ndarray) -> np.ndarray:
    if isinstance(sys, DenseStateSpace):
        lam = sys.poles()
        near = np.abs(pts[:, None] - lam[None, :]) < _SING_TOL * (1 + np.abs(lam[None, :]))
        bad = np.flatnonzero(near.any(axis=1))
        if bad.size:
            raise PoleError(bad)
        out = np.empty(pts.shape, dtype=complex)
        I = np.eye(sys.n)
        chunk = max(1, (1 << 22) // (sys.n * sys.n))
        for lo in range(0, pts.size, chunk):
            M = pts[lo:lo + chunk, None, None] * I - sys.A
            x = np.linalg.solve(M, np.broadcast_to(sys.B[:, None], (M.shape[0], sys.n, 1)))
            out[lo:lo + chunk] = x[:, :, 0] @ sys.C + sys.D
        if not np.all(np.isfinite(out)):
            raise PoleError(np.flatnonzero(~np.isfinite(out)))
        return out
    diff = pts[:, None] - sys.a[None, :]
    bad = np.flatnonzero(np.any(np.abs(diff) < _SING_TOL * (1 + np.abs(sys.a)), axis=1))
    if bad.size:
        raise PoleError(bad)
    return (sys.residues / diff).sum(axis=1) + sys.d


def transfer_continuous(sys, s) -> np.ndarray:
    """``G(s) = C (sI - A)^-1 B + D`` at the points ``s``."""
    if not sys.continuous:
        raise LTIError("transfer_continuous expects a continuous-time system")
    pts = np.atleast_1d(np.asarray(s, dtype=complex))
    return _resolvent_eval(sys, pts.ravel()).reshape(pts.shape)


def transfer_discrete(sys, z) -> np.ndarray:
    """``Gbar(z) = Cbar (zI - Abar)^-1 Bbar + Dbar`` at the points ``z``."""
    if sys.continuous:
        raise LTIError("transfer_discrete expects a discrete-time system")
    pts = np.atleast_1d(np.asarray(z, dtype=complex))
    return _resolvent_eval(sys, pts.ravel()).reshape(pts.shape)


def transfer(sys, pts) -> np.ndarray:
    return transfer_continuous(sys, pts) if sys.continuous else transfer_discrete(sys, pts)


# ---------------------------------------------------------------------------
# time domain
# ---------------------------------------------------------------------------

def simulate_recurrence(sys, u, x0=None) -> np.ndarray:
    """Run the discrete recurrence on input ``u`` from state ``x0`` (default 0)."""
    if sys.continuous:
        raise LTIError("simulate_recurrence expects a discrete-time system")
    u = as_complex_vector(u, "u")
    if u.size < 1:
        raise LTIError("input sequence must have length >= 1")
    x = np.zeros(sys.n, dtype=complex) if x0 is None else as_complex_vector(x0, "x0").copy()
    if x.size != sys.n:
        raise LTIError(f"x0 has length {x.size}, expected {sys.n}")
    y = np.empty(u.size, dtype=complex)
    if isinstance(sys, DenseStateSpace):
        A, B, C, D = sys.A, sys.B, sys.C, sys.D
        for k, uk in enumerate(u):
            y[k] = C @ x + D * uk
            x = A @ x + B * uk
    else:
        a, b, c, d = sys.a, sys.b, sys.c, sys.d
        for k, uk in enumerate(u):
            y[k] = c @ x + d * uk
            x = a * x + b * uk
    return y


def impulse_response(sys, T: int) -> np.ndarray:
    """Magnitudes ``|y_k|``, ``k < T``, of the response to a unit impulse at 0."""
    if T < 1:
        raise LTIError("T must be >= 1")
    u = np.zeros(T, dtype=complex)
    u[0] = 1.0
    return np.abs(simulate_recurrence(sys, u))


def markov_parameters(sys, count: int) -> np.ndarray:
    """``Cbar Abar^k Bbar`` for ``k < count`` (discrete systems)."""
    if sys.continuous:
        raise LTIError("markov_parameters expects a discrete-time system")
    out = np.empty(count, dtype=complex)
    if isinstance(sys, DenseStateSpace):
        v = sys.B.copy()
        for k in range(count):
            out[k] = sys.C @ v
            v = sys.A @ v
    else:
        v = sys.b.copy()
        for k in range(count):
            out[k] = sys.c @ v
            v = sys.a * v
    return out


def time_scale(sys, dt: float):
    """Realise ``G(s / dt)`` as ``(dt A, dt B, C, D)``."""
    dt = float(dt)
    if not dt > 0:
        raise LTIError(f"dt must be positive, got {dt}")
    if not sys.continuous:
        raise LTIError("time_scale expects a continuous-time system")
    if isinstance(sys, DenseStateSpace):
        return DenseStateSpace(dt * sys.A, dt * sys.B, sys.C, sys.D, continuous=True)
    return DiagonalContinuousSystem(dt * sys.a, dt * sys.b, sys.c, sys.d)


# ---------------------------------------------------------------------------
# JSON records
# ---------------------------------------------------------------------------

def _pairs(v):
    return [[float(z.real), float(z.imag)] for z in np.ravel(v)]


def _unpairs(p):
    arr = np.asarray(p, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


_KINDS = {
    DiagonalContinuousSystem: "diagonal-continuous",
    DiagonalDiscreteSystem: "diagonal-discrete",
}


def system_to_dict(sys) -> dict:
    """JSON-ready record ``{kind, n, a, b, c, d}``; complex numbers as ``[re, im]``."""
    if isinstance(sys, DenseStateSpace):
        kind = "dense-continuous" if sys.continuous else "dense-discrete"
        return {
            "kind": kind,
            "n": sys.n,
            "a": [_pairs(row) for row in sys.A],
            "b": _pairs(sys.B),
            "c": _pairs(sys.C),
            "d": _pairs([sys.D])[0],
        }
    return {
        "kind": _KINDS[type(sys)],
        "n": sys.n,
        "a": _pairs(sys.a),
        "b": _pairs(sys.b),
        "c": _pairs(sys.c),
        "d": _pairs([sys.d])[0],
    }


def system_from_dict(rec: dict):
    kind = rec.get("kind")
    d = complex(*rec["d"])
    if kind in ("dense-continuous", "dense-discrete"):
        A = _unpairs(rec["a"])
        return DenseStateSpace(A, _unpairs(rec["b"]), _unpairs(rec["c"]), d,
                               continuous=(kind == "dense-continuous"))
    cls = {v: k for k, v in _KINDS.items()}.get(kind)
    if cls is None:
        raise LTIError(f"unknown system kind {kind!r}")
    sys = cls(_unpairs(rec["a"]), _unpairs(rec["b"]), _unpairs(rec["c"]), d)
    if "n" in rec and rec["n"] != sys.n:
        raise LTIError(f"record declares n={rec['n']} but holds {sys.n} states")
    return sys


def dumps_system(sys) -> str:
    return json.dumps(system_to_dict(sys), sort_keys=True)


def loads_system(text: str):
    return system_from_dict(json.loads(text))
