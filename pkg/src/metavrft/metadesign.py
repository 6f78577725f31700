"""Meta-design: tune a convex combination of existing controllers from data.

The weights ``alpha`` live on the simplex. The cost is the instrumental
variable matching loss plus a quadratic penalty on poorly performing
controllers and a linear penalty on controllers tuned for dissimilar
plants. An optional stability bound adds one second-order cone per
frequency of the spectral grid.
"""

from __future__ import annotations

import json
import logging
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import nnls
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import _conic
from .lti import (
    ControllerParams,
    TransferFunction,
    combine_controllers,
    feedback,
    impulse,
    is_stable,
    norm_h2,
    simulate,
)
from .signals import Dataset, load_dataset, save_dataset
from .spectral import (
    SpectralError,
    SpectralGrid,
    StabilityConstraint,
    build_stability_constraint,
    residual_components,
    screen_meta_controller,
    with_window_fallback,
)
from .vrft import filtered_regression

log = logging.getLogger(__name__)

SIMPLEX_TOL = 1e-8
NORMALIZATIONS = ("mean", "sample", "none")
FEAS_TOL = 1e-6


class MetaDesignError(ValueError):
    """Invalid meta-dataset or design request."""


# ---------------------------------------------------------------------------
# meta-dataset


@dataclass(frozen=True)
class MetaEntry:
    controller: ControllerParams
    open_loop: Dataset
    closed_loop: Dataset
    delta_k: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.delta_k < 1.0:
            raise MetaDesignError("delta_k must lie in (0, 1)")
        if self.open_loop.kind != "open_loop" or self.closed_loop.kind != "closed_loop":
            raise MetaDesignError("entry needs one open-loop and one closed-loop dataset")


@dataclass
class MetaDataset:
    """Controllers ``C_k`` with their tuning data and closed-loop test records."""

    entries: list

    def __post_init__(self):
        self.entries = list(self.entries)
        if not self.entries:
            raise MetaDesignError("meta-dataset must contain at least one entry")
        first = self.entries[0]
        for e in self.entries[1:]:
            if not np.isclose(e.open_loop.ts, first.open_loop.ts):
                raise MetaDesignError("meta-dataset entries have different sample times")
            if len(e.open_loop) != len(first.open_loop) or np.max(
                np.abs(e.open_loop.u - first.open_loop.u)
            ) > 1e-12:
                raise MetaDesignError("meta-dataset entries must share the same input sequence")

    def __len__(self):
        return len(self.entries)

    def __getitem__(self, idx):
        if isinstance(idx, slice):
            return MetaDataset(self.entries[idx])
        return self.entries[idx]

    @property
    def ts(self) -> float:
        return self.entries[0].open_loop.ts

    @property
    def controllers(self) -> list:
        return [e.controller.to_tf() for e in self.entries]

    def subset(self, indices: Sequence[int]) -> "MetaDataset":
        return MetaDataset([self.entries[i] for i in indices])

    def check_compatible(self, d_new: Dataset):
        u = self.entries[0].open_loop.u
        if len(d_new) != u.size or np.max(np.abs(d_new.u - u)) > 1e-12:
            raise MetaDesignError("new-plant data must use the meta-dataset input sequence")
        if not np.isclose(d_new.ts, self.ts):
            raise MetaDesignError("sample time of the new-plant data differs from the meta-dataset")

    # -- persistence ---------------------------------------------------------
    def save(self, directory) -> Path:
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        manifest = []
        for k, e in enumerate(self.entries):
            stem = f"entry_{k:03d}"
            save_dataset(e.open_loop, directory / f"{stem}_open_loop")
            save_dataset(e.closed_loop, directory / f"{stem}_closed_loop")
            manifest.append(
                {"controller": e.controller.to_dict(), "data": stem, "delta_k": e.delta_k}
            )
        path = directory / "meta.json"
        path.write_text(json.dumps({"entries": manifest}, indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def load(cls, directory) -> "MetaDataset":
        directory = Path(directory)
        manifest = json.loads((directory / "meta.json").read_text())
        entries = []
        for item in manifest["entries"]:
            stem = item["data"]
            entries.append(
                MetaEntry(
                    ControllerParams.from_dict(item["controller"]),
                    load_dataset(directory / f"{stem}_open_loop"),
                    load_dataset(directory / f"{stem}_closed_loop"),
                    float(item.get("delta_k", 0.95)),
                )
            )
        return cls(entries)


@dataclass(frozen=True)
class MetaWeights:
    alpha: np.ndarray

    def __post_init__(self):
        a = np.atleast_1d(np.asarray(self.alpha, float)).ravel()
        if a.size < 1:
            raise MetaDesignError("alpha must be non-empty")
        if np.any(a < -SIMPLEX_TOL) or abs(a.sum() - 1.0) > SIMPLEX_TOL:
            raise MetaDesignError("alpha must lie on the probability simplex")
        object.__setattr__(self, "alpha", a)

    @classmethod
    def uniform(cls, n: int) -> "MetaWeights":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def vertex(cls, n: int, k: int) -> "MetaWeights":
        a = np.zeros(n)
        a[k] = 1.0
        return cls(a)

    def __len__(self):
        return self.alpha.size


@dataclass
class DesignConfig:
    """Tunables of the meta-design problem.

    ``normalize="mean"`` divides the matching loss, ``S_k`` and ``J_k`` by
    their averages over the meta-dataset so the penalties are
    dimensionless; ``"sample"`` divides each by its number of samples and
    ``"none"`` uses raw sums.
    """

    lambda_j: float = 30.0
    lambda_s: float = 300.0
    delta: Optional[float] = None
    ell: int = 200
    solver_tol: float = 1e-10
    max_iter: int = 200
    white_input: bool = True
    normalize: str = "mean"
    ridge: float = 1e-10

    def __post_init__(self):
        if self.lambda_j < 0 or self.lambda_s < 0:
            raise ValueError("penalties must be non-negative")
        if self.delta is not None and not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")
        if int(self.ell) < 1:
            raise ValueError("ell must be positive")
        if self.normalize not in NORMALIZATIONS:
            raise ValueError(f"normalize must be one of {NORMALIZATIONS}")
        if self.max_iter < 1 or self.solver_tol <= 0:
            raise ValueError("invalid solver settings")


# ---------------------------------------------------------------------------
# data-driven indices


def similarity_index(d_new: Dataset, d_k: Dataset) -> float:
    """``S_k``: squared distance between the open-loop outputs of two plants."""
    if len(d_new) != len(d_k) or np.max(np.abs(d_new.u - d_k.u)) > 1e-12:
        raise MetaDesignError("similarity needs experiments driven by the same input")
    diff = d_new.y - d_k.y
    return float(diff @ diff)


def performance_index(desired, closed_loop: Dataset) -> float:
    """``J~_k``: squared deviation of a closed-loop record from the desired output."""
    desired = np.asarray(desired, float).ravel()
    if desired.size != len(closed_loop):
        raise MetaDesignError("desired output and closed-loop record differ in length")
    diff = desired - closed_loop.y
    return float(diff @ diff)


def desired_output(m: TransferFunction, closed_loop: Dataset) -> np.ndarray:
    return simulate(m, closed_loop.reference)


def meta_indices(d_new: Dataset, meta: MetaDataset, m: TransferFunction):
    """``(S, J~)`` arrays for every entry of ``meta``."""
    S = np.array([similarity_index(d_new, e.open_loop) for e in meta.entries])
    J = np.array(
        [performance_index(desired_output(m, e.closed_loop), e.closed_loop) for e in meta.entries]
    )
    return S, J


def screen_meta_dataset(meta: MetaDataset, d_new: Dataset, m: TransferFunction, window: int = 200):
    """Drop entries whose estimated ``||Delta_k||_inf`` on the new plant exceeds ``delta_k``.

    Returns the kept meta-dataset and the list of removed indices.
    """
    window = min(window, (len(d_new) - 1) // 2)
    grid = SpectralGrid(window)
    keep, dropped = [], []
    for k, e in enumerate(meta.entries):
        ok = screen_meta_controller(d_new, m, e.controller.to_tf(), e.delta_k, grid)
        (keep if ok else dropped).append(k)
    if not keep:
        raise MetaDesignError("empty meta-dataset after screening")
    return meta.subset(keep), dropped


# ---------------------------------------------------------------------------
# quadratic objective


@dataclass(frozen=True)
class QuadraticObjective:
    """``J(alpha) = alpha^T H alpha - 2 f^T alpha + c``."""

    H: np.ndarray
    f: np.ndarray
    c: float

    def __call__(self, alpha) -> float:
        a = np.asarray(alpha, float)
        return float(a @ self.H @ a - 2.0 * self.f @ a + self.c)

    def gradient(self, alpha) -> np.ndarray:
        return 2.0 * (self.H @ np.asarray(alpha, float) - self.f)

    def scaled(self, s: float) -> "QuadraticObjective":
        return QuadraticObjective(self.H * s, self.f * s, self.c * s)

    @property
    def size(self) -> int:
        return self.f.size


def _warn_conditioning(H: np.ndarray):
    if H.shape[0] > 1:
        cond = np.linalg.cond(H)
        if not np.isfinite(cond) or cond > 1e12:
            warnings.warn(
                f"meta-design Gram matrix is nearly singular (condition number {cond:.3g})",
                RuntimeWarning,
                stacklevel=3,
            )


def build_iv_objective(
    d_T: Dataset,
    d_T_iv: Dataset,
    meta: MetaDataset,
    m: TransferFunction,
    w: Optional[TransferFunction] = None,
    white_input: bool = True,
) -> QuadraticObjective:
    """Instrumental-variable matching loss as an exact quadratic in ``alpha``.

    ``phi(t)`` stacks the controller outputs driven by the filtered virtual
    error of ``d_T``; ``zeta(t)`` is the same vector built from the repeated
    experiment. The cost sums ``||zeta(t) (u^L(t) - phi(t)^T alpha)||^2``,
    i.e. a least-squares fit with per-sample weights ``||zeta(t)||^2``.
    """
    if len(d_T_iv) != len(d_T) or np.max(np.abs(d_T_iv.u - d_T.u)) > 1e-12:
        raise MetaDesignError("the IV experiment must repeat the same input sequence")
    ctrls = meta.controllers
    reg = filtered_regression(d_T, m, ctrls, w, white_input)
    reg_iv = filtered_regression(d_T_iv, m, ctrls, prefilter=reg.prefilter)
    wt = np.einsum("ij,ij->i", reg_iv.regressors, reg_iv.regressors)
    Phi, uL = reg.regressors, reg.target
    H = Phi.T @ (wt[:, None] * Phi)
    f = Phi.T @ (wt * uL)
    c = float(wt @ (uL * uL))
    H = 0.5 * (H + H.T)
    _warn_conditioning(H)
    return QuadraticObjective(H, f, c)


# ---------------------------------------------------------------------------
# solver


@dataclass
class SolveReport:
    objective: float
    matching_loss: float
    delta_hat: Optional[float]
    ell: Optional[int]
    active_constraints: list
    kkt: dict
    status: str
    iterations: int
    timings_ms: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DesignTerms:
    """Normalised pieces of the full objective."""

    loss: QuadraticObjective
    S: np.ndarray
    J: np.ndarray
    lambda_j: float
    lambda_s: float

    def total(self) -> QuadraticObjective:
        H = self.loss.H + self.lambda_j * np.diag(self.J)
        f = self.loss.f - 0.5 * self.lambda_s * self.S
        return QuadraticObjective(H, f, self.loss.c)

    def __call__(self, alpha) -> float:
        return self.total()(alpha)


def design_terms(objective: QuadraticObjective, S, J, config: DesignConfig,
                 n_samples: int = 1, n_closed_loop: int = 1) -> DesignTerms:
    S = np.asarray(S, float)
    J = np.asarray(J, float)
    if np.any(S < 0) or np.any(J < 0):
        raise MetaDesignError("indices S_k and J_k must be non-negative")
    if config.normalize == "mean":
        scale = _loss_scale(objective)
        objective = objective.scaled(1.0 / scale)
        S = S / S.mean() if S.mean() > 0 else S
        J = J / J.mean() if J.mean() > 0 else J
    elif config.normalize == "sample":
        objective = objective.scaled(1.0 / n_samples)
        S = S / n_samples
        J = J / n_closed_loop
    return DesignTerms(objective, S, J, config.lambda_j, config.lambda_s)


def _loss_scale(obj: QuadraticObjective) -> float:
    """Mean of the loss over the simplex vertices (positive fallback when all vanish)."""
    vals = np.array([obj(np.eye(obj.size)[k]) for k in range(obj.size)])
    s = float(np.mean(np.maximum(vals, 0.0)))
    return s if s > 0 else 1.0


def _kkt(total: QuadraticObjective, alpha, con: Optional[StabilityConstraint], delta, active_cones):
    """Residual of the KKT conditions via non-negative multipliers fitted by NNLS.

    Stationarity reads ``g + sum lam_i grad h_i - mu + nu 1 = 0`` with
    ``mu_k >= 0`` only on zero weights and ``lam_i >= 0`` on active cones.
    """
    n = alpha.size
    g = total.gradient(alpha)
    cols = []
    for i in active_cones:
        a = con.A[i] / abs(con.phi_u[i])
        val = a @ alpha + con.c[i] / abs(con.phi_u[i])
        mag = abs(val)
        if mag > 0:
            cols.append((a.real * val.real + a.imag * val.imag) / mag)
    off = np.flatnonzero(alpha <= 1e-9)
    for k in off:
        e = np.zeros(n)
        e[k] = -1.0
        cols.append(e)
    cols.append(np.ones(n))
    cols.append(-np.ones(n))
    B = np.column_stack(cols)
    _, res = nnls(B, -g)
    scale = max(1.0, float(np.linalg.norm(g)))
    return {
        "stationarity": float(res) / scale,
        "primal_simplex": float(abs(alpha.sum() - 1.0) + max(0.0, -alpha.min())),
        "primal_cone": 0.0 if con is None else float(max(0.0, con.delta_hat(alpha) - delta)),
    }


def _project_simplex(a: np.ndarray) -> np.ndarray:
    a = np.clip(a, 0.0, None)
    s = a.sum()
    return a / s if s > 0 else np.full(a.size, 1.0 / a.size)


def solve_meta(
    objective: QuadraticObjective,
    meta: MetaDataset,
    config: DesignConfig,
    d_T: Dataset,
    m: TransferFunction,
    S=None,
    J=None,
):
    """Minimise the regularised loss over the simplex, optionally with ``delta_hat <= delta``.

    ``S`` and ``J`` default to the indices computed from ``d_T`` and the
    meta-dataset. Returns ``(MetaWeights, SolveReport)``.
    """
    t0 = time.perf_counter()
    n = len(meta)
    if objective.size != n:
        raise MetaDesignError("objective size does not match the meta-dataset")
    if S is None or J is None:
        S0, J0 = meta_indices(d_T, meta, m)
        S = S0 if S is None else S
        J = J0 if J is None else J
    terms = design_terms(objective, S, J, config, len(d_T), len(meta[0].closed_loop))
    total = terms.total()
    t_build = time.perf_counter()

    con = None
    ell = None
    status, iters = "trivial", 0
    if n == 1:
        alpha = np.ones(1)
        if config.delta is not None:
            ell = min(config.ell, (len(d_T) - 1) // 2)
            con = build_stability_constraint(d_T, m, meta.controllers, SpectralGrid(ell))
            if con.delta_hat(alpha) > config.delta + FEAS_TOL:
                raise _conic.InfeasibleError(
                    f"single controller violates delta={config.delta}", con.delta_hat(alpha)
                )
    else:
        H = total.H + config.ridge * max(1.0, float(np.trace(total.H)) / n) * np.eye(n)
        R = _conic.factor_psd(H)
        q = -2.0 * total.f
        zeros = np.zeros(R.shape[0])
        if config.delta is None:
            res = _conic.solve_program(
                R, zeros, q, simplex=True, max_iter=config.max_iter, tol=config.solver_tol
            )
        else:
            residual = residual_components(d_T, m, meta.controllers)
            margin = min(1e-7, 0.1 * FEAS_TOL)

            def attempt(window):
                c = build_stability_constraint(d_T, m, meta.controllers, SpectralGrid(window), residual)
                A, cc = c.normalized()
                r = _conic.solve_program(
                    R, zeros, q, simplex=True, cone_A=A, cone_c=cc,
                    bound=config.delta - margin, max_iter=config.max_iter, tol=config.solver_tol,
                )
                a = _project_simplex(r.x)
                if c.delta_hat(a) > config.delta + FEAS_TOL:
                    raise _conic.SolverError("post-hoc stability check failed")
                return r, c

            try:
                (res, con), ell = with_window_fallback(
                    attempt, config.ell, len(d_T),
                    errors=(_conic.SolverError, SpectralError),
                )
            except _conic.InfeasibleError as exc:
                raise _conic.InfeasibleError(
                    f"meta-design infeasible for delta={config.delta}; "
                    f"smallest feasible bound is about {exc.min_delta:.4g}",
                    exc.min_delta,
                ) from exc
        alpha = _project_simplex(res.x)
        status, iters = res.status, res.iterations
    t_solve = time.perf_counter()

    active = [f"alpha[{k}]>=0" for k in np.flatnonzero(alpha <= 1e-9)]
    active_cones = []
    dh = None
    if con is not None:
        ratios = con.ratios(alpha)
        dh = float(ratios.max())
        active_cones = [int(i) for i in np.flatnonzero(ratios >= config.delta - 1e-6)]
        active += [f"stability@w={con.grid.frequencies[i]:.6g}" for i in active_cones]
    kkt = _kkt(total, alpha, con, config.delta, active_cones)
    report = SolveReport(
        objective=total(alpha),
        matching_loss=terms.loss(alpha),
        delta_hat=dh,
        ell=ell,
        active_constraints=active,
        kkt=kkt,
        status=status,
        iterations=iters,
        timings_ms={
            "assemble": 1e3 * (t_build - t0),
            "solve": 1e3 * (t_solve - t_build),
        },
    )
    return MetaWeights(alpha), report


def materialize_meta_controller(meta: MetaDataset, alpha) -> TransferFunction:
    """``sum_k alpha_k C_k`` as one transfer function."""
    a = alpha.alpha if isinstance(alpha, MetaWeights) else np.asarray(alpha, float)
    if a.size != len(meta):
        raise MetaDesignError("alpha length does not match the meta-dataset")
    params = meta_controller_params(meta, a)
    if params is not None:
        return params.to_tf()
    return combine_controllers(meta.controllers, a)


def meta_controller_params(meta: MetaDataset, alpha) -> Optional[ControllerParams]:
    """Parameters ``sum_k alpha_k theta_k`` when all entries share one basis, else ``None``."""
    a = alpha.alpha if isinstance(alpha, MetaWeights) else np.asarray(alpha, float)
    ctrl = [e.controller for e in meta.entries]
    if len({(c.basis, c.ts) for c in ctrl}) != 1:
        return None
    theta = np.sum([ak * c.theta for ak, c in zip(a, ctrl)], axis=0)
    return ControllerParams(theta, ctrl[0].basis, ctrl[0].ts)


# ---------------------------------------------------------------------------
# model-based oracles


def _impulse_until_settled(sys: TransferFunction, horizon: int = 512, max_len: int = 2**20):
    n = horizon
    while True:
        h = impulse(sys, n)
        total = float(h @ h)
        tail = float(h[n // 2 :] @ h[n // 2 :])
        if total == 0.0 or tail <= 1e-14 * total or n >= max_len:
            return h
        n *= 2


def ideal_loss(m, c: TransferFunction, g, f: Optional[TransferFunction] = None) -> float:
    """``||F (M - CG/(1+CG))||_2``; ``inf`` when the loop is unstable."""
    t = feedback(c, g)
    if not is_stable(t):
        t = t.minreal()
        if not is_stable(t):
            return float("inf")
    err = m - t
    if f is not None:
        err = f * err
    return norm_h2(err)


def approx_loss_terms(m, controllers, g, f: Optional[TransferFunction] = None):
    """Impulse responses of ``F Xi M`` and ``F Xi^2 C_k G`` on a common horizon."""
    xi = 1 - m
    f = TransferFunction([1.0], [1.0], m.ts) if f is None else f
    target = (f * xi * m).minreal()
    parts = [(f * xi * (xi * c).minreal() * g).minreal() for c in controllers]
    hs = [_impulse_until_settled(target)] + [_impulse_until_settled(p) for p in parts]
    n = max(h.size for h in hs)
    hs = [impulse(s, n) for s in [target] + parts]
    return hs[0], np.column_stack(hs[1:])


def ideal_quadratic(m, controllers, g, f: Optional[TransferFunction] = None) -> QuadraticObjective:
    """Squared approximate loss ``||F Xi M - F Xi^2 C(alpha) G||_2^2`` as a quadratic."""
    h0, Hk = approx_loss_terms(m, controllers, g, f)
    return QuadraticObjective(Hk.T @ Hk, Hk.T @ h0, float(h0 @ h0))


def approx_loss(m, c: TransferFunction, g, f: Optional[TransferFunction] = None) -> float:
    """``||F Xi M - F Xi^2 C G||_2``."""
    # each term is reduced separately: the difference hides Xi's zeros at 1 behind
    # repeated integrator poles that minreal cannot pair reliably
    h0, hk = approx_loss_terms(m, [c], g, f)
    return float(np.linalg.norm(h0 - hk[:, 0]))


# ---------------------------------------------------------------------------
# estimator and persistence


class MetaVRFT(BaseEstimator):
    """Estimator wrapper: ``fit`` solves the meta-design for a new plant.

    Parameters mirror :class:`DesignConfig`; ``meta_dataset`` holds the
    prior controllers and ``reference_model`` the target ``M``.
    """

    def __init__(self, meta_dataset=None, reference_model=None, lambda_j=30.0, lambda_s=300.0,
                 delta=None, ell=200, white_input=True, normalize="mean", screen=False,
                 solver_tol=1e-10, max_iter=200):
        self.meta_dataset = meta_dataset
        self.reference_model = reference_model
        self.lambda_j = lambda_j
        self.lambda_s = lambda_s
        self.delta = delta
        self.ell = ell
        self.white_input = white_input
        self.normalize = normalize
        self.screen = screen
        self.solver_tol = solver_tol
        self.max_iter = max_iter

    def _config(self) -> DesignConfig:
        return DesignConfig(self.lambda_j, self.lambda_s, self.delta, self.ell, self.solver_tol,
                            self.max_iter, self.white_input, self.normalize)

    def fit(self, dataset: Dataset, dataset_iv: Dataset):
        if self.meta_dataset is None or self.reference_model is None:
            raise ValueError("meta_dataset and reference_model are required")
        meta = self.meta_dataset
        meta.check_compatible(dataset)
        self.dropped_ = []
        if self.screen:
            meta, self.dropped_ = screen_meta_dataset(meta, dataset, self.reference_model, self.ell)
        obj = build_iv_objective(dataset, dataset_iv, meta, self.reference_model,
                                 white_input=self.white_input)
        weights, report = solve_meta(obj, meta, self._config(), dataset, self.reference_model)
        self.meta_used_ = meta
        self.alpha_ = weights.alpha
        self.report_ = report
        self.controller_ = materialize_meta_controller(meta, weights)
        self.params_ = meta_controller_params(meta, weights)
        return self

    def predict(self, error) -> np.ndarray:
        if not hasattr(self, "controller_"):
            raise NotFittedError("MetaVRFT instance is not fitted yet")
        return simulate(self.controller_, error)


def solution_to_dict(weights: MetaWeights, report: SolveReport, include_timings: bool = True) -> dict:
    out = {
        "alpha": weights.alpha.tolist(),
        "objective": report.objective,
        "matching_loss": report.matching_loss,
        "delta_hat": report.delta_hat,
        "ell": report.ell,
        "active_constraints": report.active_constraints,
        "kkt": report.kkt,
        "status": report.status,
    }
    if include_timings:
        out["timings_ms"] = report.timings_ms
    return out


def save_solution(path, weights: MetaWeights, report: SolveReport, include_timings=True) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(solution_to_dict(weights, report, include_timings), indent=2,
                               sort_keys=True) + "\n")
    return path


def load_solution(path) -> dict:
    d = json.loads(Path(path).read_text())
    MetaWeights(d["alpha"])
    return d
