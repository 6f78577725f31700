"""Experiment data: open/closed-loop generation, virtual references, prefilters."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, replace
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
from scipy import linalg

from .lti import (
    TransferFunction,
    UnstableSystemError,
    LTIError,
    check_signal,
    is_stable,
    simulate,
)

DIVERGENCE_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class Dataset:
    """Input/output record of one experiment.

    ``kind`` is ``"open_loop"`` or ``"closed_loop"``; closed-loop records
    carry the reference they tracked. ``unstable`` marks closed-loop runs
    that diverged and were truncated.
    """

    u: np.ndarray
    y: np.ndarray
    ts: float
    noise_std: float = 0.0
    seed: Optional[int] = None
    kind: str = "open_loop"
    reference: Optional[np.ndarray] = None
    unstable: bool = False

    def __post_init__(self):
        u = np.asarray(self.u, float).ravel()
        y = np.asarray(self.y, float).ravel()
        if u.size != y.size:
            raise ValueError(f"u and y lengths differ ({u.size} vs {y.size})")
        if u.size < 1 and not self.unstable:
            raise ValueError("dataset must contain at least one sample")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if self.kind not in ("open_loop", "closed_loop"):
            raise ValueError(f"unknown dataset kind '{self.kind}'")
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "y", y)
        if self.kind == "closed_loop":
            if self.reference is None:
                raise ValueError("closed-loop dataset requires a reference")
            r = np.asarray(self.reference, float).ravel()
            if r.size != u.size:
                raise ValueError("reference length must match the data")
            object.__setattr__(self, "reference", r)
        elif self.reference is not None:
            object.__setattr__(self, "reference", np.asarray(self.reference, float).ravel())

    def __len__(self):
        return self.u.size

    @property
    def meta(self) -> dict:
        return {
            "ts": self.ts,
            "noise_std": self.noise_std,
            "seed": self.seed,
            "kind": self.kind,
            "unstable": self.unstable,
        }


def white_input(n: int, std: float, seed: int) -> np.ndarray:
    """Zero-mean white Gaussian excitation, reproducible from ``seed``."""
    return np.random.default_rng(seed).normal(0.0, std, n)


def _noise(n: int, std: float, seed: Optional[int]) -> np.ndarray:
    if std == 0.0:
        return np.zeros(n)
    return np.random.default_rng(seed).normal(0.0, std, n)


def generate_open_loop(g: TransferFunction, u, noise_std: float, seed: int) -> Dataset:
    """Open-loop experiment ``y = G u + v`` with white Gaussian ``v``."""
    if noise_std < 0:
        raise ValueError("noise_std must be non-negative")
    if not is_stable(g):
        raise UnstableSystemError("open-loop data collection requires a stable plant")
    u = check_signal(u, "input")
    y = simulate(g, u) + _noise(u.size, noise_std, seed)
    return Dataset(u, y, g.ts, float(noise_std), seed, "open_loop")


def simulate_closed_loop(
    g: TransferFunction,
    c: TransferFunction,
    reference,
    noise_std: float,
    seed: Optional[int],
) -> Dataset:
    """Iterate ``e = r - (y° + v)``, ``u = C e``, ``y° = G u`` sample by sample.

    The measured output ``y° + v`` is what the controller sees and what is
    recorded. Runs exceeding ``1e12`` in magnitude are truncated and marked
    ``unstable`` rather than raising.
    """
    r = check_signal(reference, "reference")
    n = r.size
    v = _noise(n, noise_std, seed)
    cb, ca = c.num, c.den
    gb, ga = g.num, g.den
    cb0 = cb[0]
    gb0 = gb[0]
    denom = 1.0 + cb0 * gb0
    if abs(denom) < 1e-12:
        raise LTIError("ill-posed algebraic loop: 1 + c0*g0 = 0")

    e = np.zeros(n)
    u = np.zeros(n)
    yo = np.zeros(n)
    cb1, ca1, gb1, ga1 = cb[1:], ca[1:], gb[1:], ga[1:]
    unstable = False
    stop = n
    for t in range(n):
        pc = 0.0
        for i in range(min(cb1.size, t)):
            pc += cb1[i] * e[t - 1 - i]
        for i in range(min(ca1.size, t)):
            pc -= ca1[i] * u[t - 1 - i]
        pg = 0.0
        for i in range(min(gb1.size, t)):
            pg += gb1[i] * u[t - 1 - i]
        for i in range(min(ga1.size, t)):
            pg -= ga1[i] * yo[t - 1 - i]
        ut = (cb0 * (r[t] - v[t] - pg) + pc) / denom
        yt = gb0 * ut + pg
        if not np.isfinite(yt) or abs(yt) > DIVERGENCE_LIMIT or abs(ut) > DIVERGENCE_LIMIT:
            unstable = True
            stop = t
            break
        u[t] = ut
        yo[t] = yt
        e[t] = r[t] - yt - v[t]
    y = yo[:stop] + v[:stop]
    return Dataset(
        u[:stop], y, g.ts, float(noise_std), seed, "closed_loop", r[:stop], unstable
    )


class VirtualReference(NamedTuple):
    r: np.ndarray
    valid: slice


def virtual_reference(m: TransferFunction, y) -> VirtualReference:
    """Set point ``r_v`` with ``y = M r_v``, built by delay-compensated inversion.

    With ``M = q^-d M'`` (``M'`` biproper), ``r_v(t) = (M'^-1 y)(t + d)``.
    The returned array has the length of ``y``; only ``r[valid]``
    (``t < T - d``) is defined, the last ``d`` entries are zero. On that
    range the virtual error ``r_v - y`` is available, and ``M r_v``
    reproduces ``y`` exactly for ``t >= d``.
    """
    y = check_signal(y, "output")
    if m.den.size == 1 and m.num.size == 1 and np.isclose(m.num[0], 1.0):
        raise ValueError("reference model must differ from the unit gain")
    if not is_stable(m):
        raise UnstableSystemError("reference model must be stable")
    d = m.relative_degree
    core = m.num[d:]
    if core.size > 1 and np.any(np.abs(np.roots(core)) >= 1.0):
        raise ValueError("reference model has non-minimum-phase zeros; its inverse is unstable")
    n = y.size
    if n <= d:
        raise ValueError(f"need more than {d} samples to invert a model with delay {d}")
    inv = TransferFunction(m.den, core, m.ts)
    r = np.zeros(n)
    r[: n - d] = simulate(inv, y[d:])
    return VirtualReference(r, slice(0, n - d))


def fit_ar(u, order: int):
    """Yule-Walker AR fit ``A(q^-1) u = e``; returns ``(a, sigma_e)`` with ``a[0] = 1``."""
    u = np.asarray(u, float) - np.mean(u)
    n = u.size
    r = np.array([u[: n - k] @ u[k:] / n for k in range(order + 1)])
    if r[0] <= 0:
        raise ValueError("zero-variance input")
    phi = linalg.solve_toeplitz(r[:order], r[1 : order + 1])
    sigma2 = r[0] - phi @ r[1 : order + 1]
    return np.concatenate([[1.0], -phi]), float(np.sqrt(max(sigma2, 0.0)))


def design_prefilter(
    m: TransferFunction,
    w: Optional[TransferFunction],
    u,
    white_input: bool = True,
    ar_order: int = 10,
) -> TransferFunction:
    """VRFT prefilter ``L = W M (1 - M) / Phi_u^(1/2)``.

    For white input the spectral factor is the sample standard deviation of
    ``u``. Otherwise an AR model of ``u`` supplies the minimum-phase factor
    ``sigma_e / A``, so ``L`` absorbs ``A / sigma_e``.
    """
    u = check_signal(u, "input")
    if not is_stable(m):
        raise UnstableSystemError("reference model must be stable")
    if m.den.size == 1 and m.num.size == 1 and np.isclose(m.num[0], 1.0):
        raise ValueError("reference model must differ from the unit gain")
    w = TransferFunction([1.0], [1.0], m.ts) if w is None else w
    base = w * m * (1 - m)
    if white_input:
        s = float(np.std(u))
        if s <= 0:
            raise ValueError("zero-variance input")
        return base * (1.0 / s)
    a, sigma = fit_ar(u, ar_order)
    if sigma <= 0:
        raise ValueError("zero-variance input")
    return base * TransferFunction(a / sigma, [1.0], m.ts)


# ---------------------------------------------------------------------------
# persistence


def _fmt(x: float) -> str:
    return repr(float(x))


def save_dataset(ds: Dataset, stem) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` (``t,u,y[,r]``) and the ``<stem>.json`` sidecar."""
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_suffix(".csv")
    json_path = stem.with_suffix(".json")
    has_r = ds.reference is not None
    with open(csv_path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["t", "u", "y", "r"] if has_r else ["t", "u", "y"])
        for i in range(len(ds)):
            row = [_fmt(i * ds.ts), _fmt(ds.u[i]), _fmt(ds.y[i])]
            if has_r:
                row.append(_fmt(ds.reference[i]))
            wr.writerow(row)
    with open(json_path, "w") as fh:
        json.dump(ds.meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return csv_path, json_path


def load_dataset(stem) -> Dataset:
    stem = Path(stem)
    csv_path = stem.with_suffix(".csv")
    meta = json.loads(stem.with_suffix(".json").read_text())
    with open(csv_path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    cols = {name: np.array([float(r[i]) for r in body]) for i, name in enumerate(header)}
    return Dataset(
        cols["u"],
        cols["y"],
        float(meta["ts"]),
        float(meta.get("noise_std", 0.0)),
        meta.get("seed"),
        meta.get("kind", "open_loop"),
        cols.get("r"),
        bool(meta.get("unstable", False)),
    )


def with_noise(ds: Dataset, y_clean, noise_std: float, seed: int) -> Dataset:
    """Copy of ``ds`` whose output is ``y_clean`` plus fresh noise."""
    y = np.asarray(y_clean, float) + _noise(len(ds), noise_std, seed)
    return replace(ds, y=y, noise_std=float(noise_std), seed=seed)
