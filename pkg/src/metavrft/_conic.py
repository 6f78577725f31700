"""Small dense convex programs: least squares + linear term, optional simplex,
optional per-frequency norm-of-affine (second-order cone) bounds."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import cvxpy as cp
import numpy as np


class SolverError(RuntimeError):
    """The convex program could not be solved to the requested accuracy."""


class InfeasibleError(SolverError):
    """The stability bound cannot be met; ``min_delta`` estimates the smallest feasible one."""

    def __init__(self, msg: str, min_delta: float = float("nan")):
        super().__init__(msg)
        self.min_delta = min_delta


@dataclass
class ConicResult:
    x: np.ndarray
    status: str
    iterations: int
    cone_duals: Optional[np.ndarray] = None
    extras: dict = field(default_factory=dict)


def _cone_expr(x, A, c):
    return cp.vstack([A.real @ x + c.real, A.imag @ x + c.imag])


def _solve(prob: cp.Problem, max_iter: int, tol: float):
    opts = dict(max_iter=max_iter, tol_gap_abs=tol, tol_gap_rel=tol, tol_feas=tol)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            prob.solve(solver=cp.CLARABEL, **opts)
        except cp.error.SolverError as exc:
            raise SolverError(str(exc)) from exc


def min_cone_bound(A: np.ndarray, c: np.ndarray, simplex: bool, n: int, max_iter=200, tol=1e-9) -> float:
    """Smallest ``t`` such that some feasible ``x`` has ``|A_i x + c_i| <= t`` for all ``i``."""
    x = cp.Variable(n)
    t = cp.Variable()
    cons = [cp.SOC(t * np.ones(A.shape[0]), _cone_expr(x, A, c), axis=0)]
    if simplex:
        cons += [x >= 0, cp.sum(x) == 1]
    prob = cp.Problem(cp.Minimize(t), cons)
    _solve(prob, max_iter, tol)
    if t.value is None:
        return float("nan")
    return float(t.value)


def solve_program(
    R: np.ndarray,
    r: np.ndarray,
    q: Optional[np.ndarray] = None,
    *,
    simplex: bool = False,
    cone_A: Optional[np.ndarray] = None,
    cone_c: Optional[np.ndarray] = None,
    bound: Optional[float] = None,
    max_iter: int = 200,
    tol: float = 1e-10,
) -> ConicResult:
    """Minimise ``||R x - r||^2 + q^T x`` subject to the optional constraints.

    Cone rows are ``|cone_A[i] @ x + cone_c[i]| <= bound`` with complex
    ``cone_A``/``cone_c`` (already scaled by the caller).
    """
    n = R.shape[1]
    x = cp.Variable(n)
    obj = cp.sum_squares(R @ x - r)
    if q is not None:
        obj = obj + q @ x
    cons = []
    if simplex:
        cons += [x >= 0, cp.sum(x) == 1]
    cone = None
    if cone_A is not None:
        if bound is None:
            raise ValueError("cone constraints need a bound")
        cone = cp.SOC(bound * np.ones(cone_A.shape[0]), _cone_expr(x, cone_A, cone_c), axis=0)
        cons.append(cone)
    prob = cp.Problem(cp.Minimize(obj), cons)
    _solve(prob, max_iter, tol)
    status = prob.status
    iters = int(getattr(prob.solver_stats, "num_iters", 0) or 0)
    if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        min_delta = float("nan")
        if cone_A is not None:
            min_delta = min_cone_bound(cone_A, cone_c, simplex, n, max_iter)
        raise InfeasibleError(
            f"stability bound {bound} is infeasible; smallest feasible bound is about {min_delta:.4g}",
            min_delta,
        )
    if status != cp.OPTIMAL or x.value is None:
        raise SolverError(f"solver stopped with status '{status}' after {iters} iterations")
    duals = None
    if cone is not None and cone.dual_value is not None:
        dv = cone.dual_value
        duals = np.asarray(dv[0] if isinstance(dv, (list, tuple)) else dv, float).ravel()
    return ConicResult(np.asarray(x.value, float), status, iters, duals)


def factor_psd(H: np.ndarray) -> np.ndarray:
    """``R`` with ``R^T R = H`` for a symmetric PSD ``H`` (tiny negative modes dropped)."""
    H = 0.5 * (H + H.T)
    w, V = np.linalg.eigh(H)
    w = np.clip(w, 0.0, None)
    return (np.sqrt(w)[:, None] * V.T)
