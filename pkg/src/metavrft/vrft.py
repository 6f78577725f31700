"""One-shot Virtual Reference Feedback Tuning of fixed-structure controllers.

Supports the plain least-squares estimator, the two-experiment
instrumental-variable correction and the spectral stability constraint
(c-VRFT).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import _conic
from .lti import ControllerParams, TransferFunction, get_basis, simulate
from .signals import Dataset, design_prefilter, simulate_closed_loop, virtual_reference
from .spectral import SpectralGrid, build_stability_constraint, with_window_fallback

log = logging.getLogger(__name__)


class VRFTError(ValueError):
    """Raised when the VRFT regression is ill-posed."""


class UnstableEntryError(RuntimeError):
    """A tuned controller destabilised its own plant in the closed-loop test."""


@dataclass(frozen=True)
class FilteredRegression:
    """Prefiltered target ``u^L`` and regressors ``phi`` on the valid range."""

    target: np.ndarray
    regressors: np.ndarray
    prefilter: TransferFunction


def filtered_regression(
    dataset: Dataset,
    m: TransferFunction,
    functions: Sequence[TransferFunction],
    w: Optional[TransferFunction] = None,
    white_input: bool = True,
    prefilter: Optional[TransferFunction] = None,
) -> FilteredRegression:
    """Build ``u^L`` and ``phi(t) = [f_i(q^-1) e_v^L(t)]_i`` from one experiment.

    ``functions`` is a controller basis for classical VRFT, or the list of
    meta-dataset controllers for the meta design.
    """
    rv, valid = virtual_reference(m, dataset.y)
    L = prefilter if prefilter is not None else design_prefilter(m, w, dataset.u, white_input)
    ev = rv[valid] - dataset.y[valid]
    uL = simulate(L, dataset.u[valid])
    evL = simulate(L, ev)
    Phi = np.column_stack([simulate(f, evL) for f in functions])
    return FilteredRegression(uL, Phi, L)


@dataclass
class VrftProblem:
    dataset: Dataset
    m: TransferFunction
    dataset_iv: Optional[Dataset] = None
    w: Optional[TransferFunction] = None
    basis: str = "pi"
    delta: Optional[float] = None
    window: int = 200
    white_input: bool = True
    max_iter: int = 200

    def __post_init__(self):
        if self.dataset_iv is not None:
            if len(self.dataset_iv) != len(self.dataset) or not np.allclose(
                self.dataset_iv.u, self.dataset.u, rtol=0, atol=1e-12
            ):
                raise ValueError("the IV experiment must repeat the same input sequence")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


@dataclass
class VrftResult:
    params: ControllerParams
    window: Optional[int] = None
    delta_hat: Optional[float] = None
    info: dict = field(default_factory=dict)


def _normal_equations(reg: FilteredRegression, reg_iv: Optional[FilteredRegression]):
    n = reg.target.size
    Z = reg_iv.regressors if reg_iv is not None else reg.regressors
    G = Z.T @ reg.regressors / n
    h = Z.T @ reg.target / n
    return G, h


def _check_rank(G: np.ndarray, names: Sequence[str]):
    s = np.linalg.svd(G, compute_uv=False)
    if s[0] == 0 or s[-1] / s[0] < 1e-12:
        _, _, vt = np.linalg.svd(G)
        direction = ", ".join(f"{v:+.3g}*{nm}" for v, nm in zip(vt[-1], names))
        raise VRFTError(f"rank-deficient regressor Gram matrix; null direction: {direction}")


def vrft_tune(problem: VrftProblem) -> VrftResult:
    """Tune ``theta`` for the basis of ``problem`` from its data.

    Without a stability bound the plain estimator solves the least-squares
    normal equations and the IV estimator solves
    ``sum zeta (u^L - phi^T theta) = 0``. With a bound, the same residual
    (``||Z^T (u^L - Phi theta)||`` for IV) is minimised subject to the
    spectral constraint at every grid frequency.
    """
    ds = problem.dataset
    basis = get_basis(problem.basis, ds.ts)
    names = [f"beta{i}" for i in range(basis.size)] if problem.basis != "pi" else ["Kp", "Ki"]
    reg = filtered_regression(ds, problem.m, basis.functions, problem.w, problem.white_input)
    reg_iv = None
    if problem.dataset_iv is not None:
        reg_iv = filtered_regression(
            problem.dataset_iv, problem.m, basis.functions, prefilter=reg.prefilter
        )
    G, h = _normal_equations(reg, reg_iv)
    _check_rank(G, names)

    if problem.delta is None:
        theta = np.linalg.solve(G, h)
        return VrftResult(ControllerParams(theta, problem.basis, ds.ts), info={"iv": reg_iv is not None})

    if reg_iv is None:
        n = reg.target.size
        R, r = reg.regressors / np.sqrt(n), reg.target / np.sqrt(n)
    else:
        R, r = G, h
    scale = max(float(np.linalg.norm(r)), 1e-300)
    R, r = R / scale, r / scale

    def solve(window):
        grid = SpectralGrid(window)
        con = build_stability_constraint(ds, problem.m, basis.functions, grid)
        A, c = con.normalized()
        res = _conic.solve_program(
            R, r, cone_A=A, cone_c=c, bound=problem.delta, max_iter=problem.max_iter
        )
        return res, con

    try:
        (res, con), window = with_window_fallback(
            solve, problem.window, len(ds), errors=(_conic.SolverError,)
        )
    except _conic.InfeasibleError as exc:
        raise _conic.InfeasibleError(
            f"c-VRFT infeasible for delta={problem.delta}; try delta >= {exc.min_delta:.3g}",
            exc.min_delta,
        ) from exc
    params = ControllerParams(res.x, problem.basis, ds.ts)
    return VrftResult(params, window, con.delta_hat(res.x), {"iv": reg_iv is not None})


class VRFT(BaseEstimator):
    """Estimator wrapper around :func:`vrft_tune`.

    Parameters
    ----------
    reference_model : TransferFunction
        Desired closed-loop map ``M``.
    basis : str, default="pi"
    weighting : TransferFunction or None
        Output weighting ``W``; ``None`` means unity.
    delta : float or None
        Stability bound for c-VRFT; ``None`` disables the constraint.
    window : int, default=200
        Preferred correlation window for the stability constraint.
    white_input : bool, default=True
        Use the scalar prefilter normalisation for white excitation.

    Attributes
    ----------
    params_ : ControllerParams
    controller_ : TransferFunction
    window_ : int or None
    delta_hat_ : float or None
    """

    def __init__(self, reference_model=None, basis="pi", weighting=None, delta=None,
                 window=200, white_input=True, max_iter=200):
        self.reference_model = reference_model
        self.basis = basis
        self.weighting = weighting
        self.delta = delta
        self.window = window
        self.white_input = white_input
        self.max_iter = max_iter

    def fit(self, dataset: Dataset, dataset_iv: Optional[Dataset] = None):
        if self.reference_model is None:
            raise ValueError("reference_model is required")
        problem = VrftProblem(
            dataset, self.reference_model, dataset_iv, self.weighting, self.basis,
            self.delta, self.window, self.white_input, self.max_iter,
        )
        res = vrft_tune(problem)
        self.params_ = res.params
        self.controller_ = res.params.to_tf()
        self.window_ = res.window
        self.delta_hat_ = res.delta_hat
        return self

    def predict(self, error) -> np.ndarray:
        """Controller output ``u = C e`` for a tracking-error sequence."""
        if not hasattr(self, "controller_"):
            raise NotFittedError("VRFT instance is not fitted yet")
        return simulate(self.controller_, error)


@dataclass
class EntryConfig:
    """Settings for tuning and testing one meta-dataset controller."""

    delta: Optional[float] = 0.5
    window: int = 200
    step: float = 1000.0
    horizon: int = 150
    noise_std: Optional[float] = None
    basis: str = "pi"


def build_meta_controller_entry(
    plant: TransferFunction,
    g_data: Dataset,
    g_data_iv: Optional[Dataset],
    m: TransferFunction,
    config: EntryConfig = EntryConfig(),
    seed: Optional[int] = None,
):
    """Tune ``C_k`` by c-VRFT and run the step test on the plant.

    ``plant`` stands in for the physical system used in the closed-loop
    test. Returns ``(ControllerParams, closed-loop Dataset)``; raises
    :class:`UnstableEntryError` if the test diverges.
    """
    res = vrft_tune(VrftProblem(g_data, m, g_data_iv, basis=config.basis,
                                delta=config.delta, window=config.window))
    ref = np.full(config.horizon, config.step)
    noise = g_data.noise_std if config.noise_std is None else config.noise_std
    cl = simulate_closed_loop(plant, res.params.to_tf(), ref, noise, seed)
    if cl.unstable:
        raise UnstableEntryError("closed-loop test diverged; entry rejected")
    return res.params, cl
