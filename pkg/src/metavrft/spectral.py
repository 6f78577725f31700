"""Sampled correlations, discrete spectra and the data-driven stability index.

The stability index of a controller family that is affine in its weights
``alpha`` (a meta-controller, or a fixed basis with parameters ``theta``)
is the largest ratio ``|Phi_{u,e_s}(w_i; alpha)| / |Phi_u(w_i)|`` over the
grid ``w_i = 2 pi i / (2 l + 1)``, ``i = 0..l``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal as sps

from .lti import TransferFunction, check_signal, simulate
from .signals import Dataset


class SpectralError(ValueError):
    """Raised when spectra cannot be formed from the available data."""


@dataclass(frozen=True)
class SpectralGrid:
    """Frequencies ``2 pi i / (2 window + 1)`` for ``i = 0..window``."""

    window: int

    def __post_init__(self):
        if int(self.window) < 1:
            raise ValueError("window must be >= 1")
        object.__setattr__(self, "window", int(self.window))

    @property
    def frequencies(self) -> np.ndarray:
        ell = self.window
        return 2.0 * np.pi * np.arange(ell + 1) / (2 * ell + 1)

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.window, self.window + 1)

    def __len__(self):
        return self.window + 1


def sampled_crosscorr(u, e, lag: int) -> float:
    """``(1/T) sum_t u(t - lag) e(t)`` with out-of-range samples taken as zero."""
    u = check_signal(u, "u")
    e = check_signal(e, "e")
    n = u.size
    if e.size != n:
        raise ValueError("signals must have equal length")
    lag = int(lag)
    if abs(lag) >= n:
        return 0.0
    if lag >= 0:
        return float(u[: n - lag] @ e[lag:]) / n
    return float(u[-lag:] @ e[: n + lag]) / n


def crosscorr(u, e, window: int) -> np.ndarray:
    """Cross-correlations for lags ``-window..window`` (requires ``T > 2 window``)."""
    u = np.asarray(u, float)
    e = np.asarray(e, float)
    n = u.size
    if e.shape[0] != n:
        raise ValueError("signals must have equal length")
    if n <= 2 * window:
        raise SpectralError(f"need T > 2*window (T={n}, window={window})")
    if e.ndim == 1:
        full = sps.correlate(e, u, mode="full", method="fft" if n > 512 else "direct")
        mid = n - 1
        return full[mid - window : mid + window + 1] / n
    return np.stack([crosscorr(u, e[:, k], window) for k in range(e.shape[1])], axis=1)


def spectrum(corr, grid: SpectralGrid) -> np.ndarray:
    """Finite Fourier sum ``sum_tau corr(tau) exp(-j tau w_i)`` on the grid.

    Since ``w_i`` are the bins of a length ``2l+1`` DFT, this is an FFT of
    the lag sequence rotated so that lag 0 comes first.
    """
    corr = np.asarray(corr)
    ell = grid.window
    if corr.shape[0] != 2 * ell + 1:
        raise ValueError(f"expected {2 * ell + 1} lags, got {corr.shape[0]}")
    rotated = np.fft.ifftshift(corr, axes=0)
    return np.fft.fft(rotated, axis=0)[: ell + 1]


def input_spectrum(u, grid: SpectralGrid) -> np.ndarray:
    """Real auto-spectrum of ``u`` from the symmetrised sample autocorrelation."""
    g = crosscorr(u, u, grid.window)
    g = 0.5 * (g + g[::-1])
    return spectrum(g, grid).real


@dataclass(frozen=True)
class AffineResidual:
    """``e_s(alpha) = E @ alpha + b`` for the stability residual."""

    E: np.ndarray
    b: np.ndarray

    def __call__(self, alpha) -> np.ndarray:
        return self.E @ np.asarray(alpha, float) + self.b


def residual_components(
    dataset: Dataset, m: TransferFunction, controllers: Sequence[TransferFunction]
) -> AffineResidual:
    """Per-controller columns of ``e_s = M u - sum_k alpha_k C_k (1 - M) y``."""
    xi_y = simulate(1 - m, dataset.y)
    b = simulate(m, dataset.u)
    E = np.empty((len(dataset), len(controllers)))
    for k, c in enumerate(controllers):
        E[:, k] = -simulate(c, xi_y)
    return AffineResidual(E, b)


def stability_residual(dataset, m, controllers, alpha) -> np.ndarray:
    """Data-driven proxy of ``Delta(alpha) u``: ``M u - C(alpha) (1 - M) y``."""
    return residual_components(dataset, m, controllers)(alpha)


@dataclass(frozen=True)
class StabilityConstraint:
    """Spectral stability data at one window length.

    ``A @ alpha + c`` gives ``Phi_{u,e_s}(w_i; alpha)`` and ``phi_u`` the
    input spectrum on the same grid.
    """

    grid: SpectralGrid
    A: np.ndarray
    c: np.ndarray
    phi_u: np.ndarray

    def ratios(self, alpha) -> np.ndarray:
        return np.abs(self.A @ np.asarray(alpha, float) + self.c) / np.abs(self.phi_u)

    def delta_hat(self, alpha) -> float:
        return float(self.ratios(alpha).max())

    def normalized(self):
        """``(A, c)`` divided row-wise by ``|phi_u|`` for well-scaled cones."""
        s = np.abs(self.phi_u)
        return self.A / s[:, None], self.c / s

    def to_csv(self, path, alpha) -> Path:
        """Diagnostic dump of ``(w_i, |Phi_ue|, Phi_u)``."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        cross = np.abs(self.A @ np.asarray(alpha, float) + self.c)
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh, lineterminator="\n")
            wr.writerow(["omega", "abs_phi_ue", "phi_u"])
            for w, a, p in zip(self.grid.frequencies, cross, self.phi_u):
                wr.writerow([repr(float(w)), repr(float(a)), repr(float(p))])
        return path


def build_stability_constraint(
    dataset: Dataset,
    m: TransferFunction,
    controllers: Sequence[TransferFunction],
    grid: SpectralGrid,
    residual: AffineResidual | None = None,
) -> StabilityConstraint:
    if dataset.kind != "open_loop":
        raise ValueError("the stability index needs open-loop data")
    res = residual or residual_components(dataset, m, controllers)
    u = dataset.u
    gam_E = crosscorr(u, res.E, grid.window)
    gam_b = crosscorr(u, res.b, grid.window)
    A = spectrum(gam_E, grid)
    c = spectrum(gam_b, grid)
    phi_u = input_spectrum(u, grid)
    floor = 1e-12 * max(float(u @ u) / u.size, np.finfo(float).tiny)
    if np.any(np.abs(phi_u) < floor):
        i = int(np.argmin(np.abs(phi_u)))
        raise SpectralError(
            f"input not persistently exciting at w={grid.frequencies[i]:.4g} rad/sample"
        )
    return StabilityConstraint(grid, A, c, phi_u)


def delta_hat(dataset, m, controllers, alpha, grid: SpectralGrid) -> float:
    """Data-driven estimate of ``||M - C(alpha) G (1 - M)||_inf``."""
    return build_stability_constraint(dataset, m, controllers, grid).delta_hat(alpha)


def screen_meta_controller(dataset, m, c_k: TransferFunction, delta_k: float, grid) -> bool:
    """Keep ``C_k`` only if its estimated ``||Delta_k||_inf`` is at most ``delta_k``."""
    if not 0.0 < delta_k < 1.0:
        raise ValueError("delta_k must lie in (0, 1)")
    return delta_hat(dataset, m, [c_k], [1.0], grid) <= delta_k


def max_window(n_samples: int) -> int:
    return (n_samples - 1) // 2


def with_window_fallback(solve, initial: int, n_samples: int, start: int = 10, errors=(Exception,)):
    """Call ``solve(window)`` with the preferred window, falling back on failure.

    If ``initial`` fails, windows ``start, 2 start, 4 start, ...`` (below
    ``initial``) are tried and the result of the largest one that succeeds
    is kept. Returns ``(result, window)``; the first error is re-raised when
    no window works.
    """
    initial = min(int(initial), max_window(n_samples))
    try:
        return solve(initial), initial
    except errors as exc:
        first = exc
    best = None
    ell = start
    while ell < initial:
        try:
            best = (solve(ell), ell)
        except errors:
            if best is not None:
                break
        ell *= 2
    if best is None:
        raise first
    return best
