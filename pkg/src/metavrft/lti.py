"""Discrete-time SISO transfer functions in the back-shift operator q^-1.

A :class:`TransferFunction` stores numerator and denominator coefficient
arrays in ascending powers of ``q^-1``::

    H(q^-1) = (b0 + b1 q^-1 + ... + bm q^-m) / (a0 + a1 q^-1 + ... + an q^-n)

which is exactly the convention used by :func:`scipy.signal.lfilter`, so
simulation from rest is a single filter call.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from numbers import Real
from typing import Sequence

import numpy as np
from scipy import optimize, signal

TRIM_TOL = 1e-12
STABILITY_TOL = 1e-9


class LTIError(ValueError):
    """Raised for ill-defined transfer functions or invalid LTI operations."""


class UnstableSystemError(LTIError):
    """Raised when an operation requires a stable system."""


def _as_coeffs(c) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(c, dtype=float)).ravel()
    if arr.size == 0:
        arr = np.zeros(1)
    if not np.all(np.isfinite(arr)):
        raise LTIError("coefficients must be finite")
    return arr


def _trim_trailing(c: np.ndarray, scale: float) -> np.ndarray:
    thresh = TRIM_TOL * max(scale, 1.0)
    nz = np.flatnonzero(np.abs(c) > thresh)
    if nz.size == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1].copy()


def _padd(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(a.size, b.size)
    out = np.zeros(n)
    out[: a.size] += a
    out[: b.size] += b
    return out


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Rational transfer function in ``q^-1`` with canonical coefficients.

    On construction the denominator is normalised to ``a0 = 1``, common
    leading zeros (pure delays shared by numerator and denominator) are
    removed and trailing coefficients below ``1e-12`` are trimmed, so equal
    systems built along different routes compare equal.

    Parameters
    ----------
    num, den : array_like
        Coefficients in ascending powers of ``q^-1``.
    ts : float
        Sample time in seconds.
    """

    num: np.ndarray
    den: np.ndarray = field(default_factory=lambda: np.ones(1))
    ts: float = 1.0

    def __post_init__(self):
        num = _as_coeffs(self.num)
        den = _as_coeffs(self.den)
        if not np.any(den):
            raise LTIError("denominator polynomial is identically zero")
        # strip shared leading zeros (q^-d / q^-d)
        while den[0] == 0.0:
            if num.size > 1 and num[0] == 0.0:
                num, den = num[1:], den[1:]
            elif not np.any(num):
                den = den[1:]
            else:
                raise LTIError("non-causal transfer function: denominator has a leading delay")
        a0 = den[0]
        num = num / a0
        den = den / a0
        scale = max(np.max(np.abs(num)), np.max(np.abs(den)))
        num = _trim_trailing(num, scale)
        den = _trim_trailing(den, scale)
        if self.ts <= 0:
            raise LTIError("sample time must be positive")
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        object.__setattr__(self, "ts", float(self.ts))

    # -- construction helpers -------------------------------------------
    @classmethod
    def gain(cls, k: float, ts: float = 1.0) -> "TransferFunction":
        return cls([k], [1.0], ts)

    @classmethod
    def delay(cls, d: int, ts: float = 1.0) -> "TransferFunction":
        num = np.zeros(d + 1)
        num[d] = 1.0
        return cls(num, [1.0], ts)

    def _coerce(self, other) -> "TransferFunction":
        if isinstance(other, TransferFunction):
            if not np.isclose(other.ts, self.ts):
                raise LTIError(f"sample time mismatch: {self.ts} vs {other.ts}")
            return other
        if isinstance(other, Real):
            return TransferFunction([float(other)], [1.0], self.ts)
        return NotImplemented

    # -- algebra ----------------------------------------------------------
    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if self.den.size == other.den.size and np.allclose(self.den, other.den, rtol=0, atol=1e-14):
            return TransferFunction(_padd(self.num, other.num), self.den, self.ts)
        num = _padd(np.convolve(self.num, other.den), np.convolve(other.num, self.den))
        return TransferFunction(num, np.convolve(self.den, other.den), self.ts)

    __radd__ = __add__

    def __neg__(self):
        return TransferFunction(-self.num, self.den, self.ts)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return TransferFunction(
            np.convolve(self.num, other.num), np.convolve(self.den, other.den), self.ts
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        if not np.any(other.num):
            raise LTIError("division by the zero transfer function")
        return TransferFunction(
            np.convolve(self.num, other.den), np.convolve(self.den, other.num), self.ts
        )

    def __rtruediv__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return other / self

    def __eq__(self, other):
        if not isinstance(other, TransferFunction):
            return NotImplemented
        return (
            np.isclose(self.ts, other.ts)
            and self.num.size == other.num.size
            and self.den.size == other.den.size
            and np.allclose(self.num, other.num, rtol=1e-9, atol=1e-12)
            and np.allclose(self.den, other.den, rtol=1e-9, atol=1e-12)
        )

    def __hash__(self):
        return hash((self.num.round(9).tobytes(), self.den.round(9).tobytes(), self.ts))

    def __repr__(self):
        return f"TransferFunction(num={self.num.tolist()}, den={self.den.tolist()}, ts={self.ts})"

    # -- structure ----------------------------------------------------------
    @property
    def is_zero(self) -> bool:
        return not np.any(self.num)

    @property
    def relative_degree(self) -> int:
        """Number of leading zero numerator coefficients (input delay)."""
        nz = np.flatnonzero(self.num)
        return int(nz[0]) if nz.size else 0

    @property
    def dc_gain(self) -> float:
        return float(self.num.sum() / self.den.sum())

    def poles(self) -> np.ndarray:
        return np.roots(self.den) if self.den.size > 1 else np.zeros(0, complex)

    def zeros(self) -> np.ndarray:
        d = self.relative_degree
        core = self.num[d:]
        return np.roots(core) if core.size > 1 else np.zeros(0, complex)

    def __call__(self, z):
        """Evaluate ``H`` at complex ``z`` (so ``q^-1 -> 1/z``)."""
        x = 1.0 / np.asarray(z, dtype=complex)
        return np.polyval(self.num[::-1], x) / np.polyval(self.den[::-1], x)

    def freqresp(self, omega) -> np.ndarray:
        """Frequency response at normalised frequencies ``omega`` (rad/sample)."""
        _, h = signal.freqz(self.num, self.den, worN=np.atleast_1d(np.asarray(omega, float)))
        return h

    def minreal(self, tol: float = 1e-7) -> "TransferFunction":
        """Cancel pole/zero pairs closer than ``tol``."""
        poles = list(self.poles())
        zeros = list(self.zeros())
        if not poles or not zeros:
            return self
        kept_z = []
        for z in zeros:
            dist = [abs(z - p) for p in poles]
            j = int(np.argmin(dist)) if dist else -1
            if j >= 0 and dist[j] < tol * max(1.0, abs(z)):
                poles.pop(j)
            else:
                kept_z.append(z)
        if len(kept_z) == len(zeros):
            return self
        d = self.relative_degree
        lead = self.num[d]
        num = np.concatenate([np.zeros(d), lead * np.atleast_1d(np.real(np.poly(kept_z)))])
        den = np.real(np.poly(poles)) if poles else np.ones(1)
        return TransferFunction(num, den, self.ts)

    # -- serialisation --------------------------------------------------------
    def to_dict(self) -> dict:
        return {"num": self.num.tolist(), "den": self.den.tolist(), "ts": self.ts}

    @classmethod
    def from_dict(cls, d: dict) -> "TransferFunction":
        return cls(d["num"], d["den"], d.get("ts", 1.0))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, s: str) -> "TransferFunction":
        return cls.from_dict(json.loads(s))


def tf(num, den=(1.0,), ts: float = 1.0) -> TransferFunction:
    return TransferFunction(num, den, ts)


def check_signal(x, name: str = "signal") -> np.ndarray:
    """Validate a 1-D finite, non-empty signal and return it as float array."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        arr = arr.ravel()
    if arr.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return arr


def simulate(sys: TransferFunction, u, initial_rest: bool = True) -> np.ndarray:
    """Output of ``sys`` driven by ``u``, evaluated from zero initial conditions.

    ``initial_rest=False`` is accepted for interface symmetry but only the
    rest initialisation is supported.
    """
    if not initial_rest:
        raise NotImplementedError("only zero initial conditions are supported")
    u = check_signal(u, "input")
    return signal.lfilter(sys.num, sys.den, u)


def impulse(sys: TransferFunction, n: int) -> np.ndarray:
    x = np.zeros(n)
    x[0] = 1.0
    return signal.lfilter(sys.num, sys.den, x)


def feedback(c: TransferFunction, g: TransferFunction, sensitivity: bool = False):
    """Complementary sensitivity ``CG/(1+CG)`` of the unit negative-feedback loop.

    With ``sensitivity=True`` returns the pair ``(CG/(1+CG), 1/(1+CG))``.
    """
    loop = c * g
    char = _padd(loop.den, loop.num)
    if not np.any(np.abs(char) > TRIM_TOL):
        raise LTIError("degenerate loop: 1 + CG is identically zero")
    if abs(char[0]) < TRIM_TOL:
        raise LTIError("ill-posed loop: 1 + CG has no direct term (algebraic loop)")
    t = TransferFunction(loop.num, char, c.ts)
    if not sensitivity:
        return t
    return t, TransferFunction(loop.den, char, c.ts)


def is_stable(sys: TransferFunction, tolerance: float = STABILITY_TOL) -> bool:
    """True iff every pole lies strictly inside the circle of radius ``1 - tolerance``."""
    p = sys.poles()
    if p.size and not np.all(np.isfinite(p)):
        raise LTIError("root finding failed")
    return bool(np.all(np.abs(p) < 1.0 - tolerance))


def _require_stable(sys: TransferFunction) -> TransferFunction:
    if is_stable(sys):
        return sys
    reduced = sys.minreal()
    if is_stable(reduced):
        return reduced
    raise UnstableSystemError(f"system is not stable (max |pole| = {np.max(np.abs(sys.poles())):.6g})")


def norm_h2(sys: TransferFunction, horizon: int = 256) -> float:
    """l2 norm of the impulse response.

    The horizon doubles until the energy in the second half of the
    window falls below ``1e-12`` of the total.
    """
    sys = _require_stable(sys)
    n = max(int(horizon), 8)
    while True:
        h = impulse(sys, n)
        total = float(h @ h)
        tail = float(h[n // 2 :] @ h[n // 2 :])
        if total == 0.0 or tail <= 1e-12 * total or n > 2**24:
            return float(np.sqrt(total))
        n *= 2


def norm_hinf(sys: TransferFunction, grid_size: int = 1024) -> float:
    """Peak gain over ``[0, pi]`` on a uniform grid refined around the maximiser."""
    if grid_size < 64:
        raise ValueError("grid_size must be at least 64")
    sys = _require_stable(sys)
    w = np.linspace(0.0, np.pi, grid_size)
    mag = np.abs(sys.freqresp(w))
    best = float(mag.max())
    step = w[1] - w[0]
    # local refinement around the top few grid peaks
    for i in np.argsort(mag)[::-1][:3]:
        lo, hi = max(0.0, w[i] - step), min(np.pi, w[i] + step)
        res = optimize.minimize_scalar(
            lambda x: -abs(sys.freqresp([x])[0]), bounds=(lo, hi), method="bounded",
            options={"xatol": 1e-10},
        )
        best = max(best, float(-res.fun))
    return best


# ---------------------------------------------------------------------------
# fixed-structure controllers


@dataclass(frozen=True)
class Basis:
    """Vector of fixed transfer functions ``beta(q^-1)`` spanning a controller class."""

    name: str
    functions: tuple

    @property
    def size(self) -> int:
        return len(self.functions)

    def combine(self, theta) -> TransferFunction:
        theta = np.asarray(theta, float)
        if theta.shape != (self.size,):
            raise ValueError(f"basis '{self.name}' expects {self.size} parameters, got {theta.shape}")
        out = TransferFunction([0.0], [1.0], self.functions[0].ts)
        for th, b in zip(theta, self.functions):
            out = out + th * b
        return out


def pi_basis(ts: float) -> Basis:
    """Discrete PI with trapezoidal integrator: ``[1, Ts/2 (1+q^-1)/(1-q^-1)]``."""
    # unity kept over the integrator denominator so gains combine by numerator sums
    prop = TransferFunction([1.0, -1.0], [1.0, -1.0], ts)
    integ = TransferFunction([ts / 2.0, ts / 2.0], [1.0, -1.0], ts)
    return Basis("pi", (prop, integ))


_BASES = {"pi": pi_basis}


def get_basis(name: str, ts: float) -> Basis:
    try:
        return _BASES[name](ts)
    except KeyError:
        raise ValueError(f"unknown controller basis '{name}'; known: {sorted(_BASES)}") from None


@dataclass(frozen=True)
class ControllerParams:
    """Parameters ``theta`` of a controller ``theta^T beta(q^-1)``."""

    theta: np.ndarray
    basis: str = "pi"
    ts: float = 1.0

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta, dtype=float)).ravel()
        object.__setattr__(self, "theta", theta)
        n = get_basis(self.basis, self.ts).size
        if theta.size != n:
            raise ValueError(f"basis '{self.basis}' expects {n} parameters, got {theta.size}")

    def to_tf(self) -> TransferFunction:
        return get_basis(self.basis, self.ts).combine(self.theta)

    def to_dict(self) -> dict:
        return {"basis": self.basis, "theta": self.theta.tolist(), "ts": self.ts}

    @classmethod
    def from_dict(cls, d: dict) -> "ControllerParams":
        return cls(np.asarray(d["theta"], float), d.get("basis", "pi"), d["ts"])


def pi_controller(kp: float, ki: float, ts: float) -> TransferFunction:
    return ControllerParams(np.array([kp, ki]), "pi", ts).to_tf()


def combine_controllers(controllers: Sequence[TransferFunction], weights) -> TransferFunction:
    """Weighted sum of controllers (shared denominators add numerators directly)."""
    weights = np.asarray(weights, float)
    if len(controllers) != weights.size:
        raise ValueError("one weight per controller required")
    out = weights[0] * controllers[0]
    for w, c in zip(weights[1:], controllers[1:]):
        out = out + w * c
    return out
