"""Brushless DC motor benchmark: plant family, data protocol and experiments.

Every random draw is seeded by :func:`derive_seed` from a master seed and a
label path, so adding an experiment never shifts the streams of another.
"""

from __future__ import annotations

import csv
import hashlib
import io
import itertools
import json
import logging
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import _conic
from .lti import TransferFunction, feedback, is_stable, norm_h2, simulate, tf
from .metadesign import (
    DesignConfig,
    MetaDataset,
    MetaEntry,
    MetaWeights,
    build_iv_objective,
    materialize_meta_controller,
    meta_indices,
    solve_meta,
)
from .signals import Dataset, generate_open_loop, simulate_closed_loop, white_input
from .vrft import EntryConfig, UnstableEntryError, VrftProblem, build_meta_controller_entry, vrft_tune

log = logging.getLogger(__name__)

TS = 0.02
REFERENCE_MODEL = tf([0.0, 0.0609], [1.0, -0.9391], TS)
DEFAULT_CAP = 250.0


def reference_model() -> TransferFunction:
    return REFERENCE_MODEL


def derive_seed(master: int, *labels) -> int:
    """63-bit seed from ``master`` and a label path via SHA-256."""
    key = "/".join([str(int(master))] + [str(x) for x in labels]).encode()
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "big") >> 1


# ---------------------------------------------------------------------------
# plant family


@dataclass(frozen=True)
class MotorFamily:
    """``G = kappa q^-2 / ((1 - p1 q^-1)(1 - p2 q^-1))`` with uniform ``kappa``, ``p2``."""

    p1: float = 0.9975
    kappa_range: tuple = (1.0, 5.75)
    p2_range: tuple = (0.0, 0.9)
    ts: float = TS

    def __post_init__(self):
        if not 0 <= self.p1 < 1:
            raise ValueError("p1 must lie in [0, 1)")
        lo, hi = self.p2_range
        if not (0 <= lo <= hi < 1) and not (-1 < lo <= hi < 1):
            raise ValueError("p2 range must lie inside the unit circle")
        if self.kappa_range[0] > self.kappa_range[1]:
            raise ValueError("kappa range is empty")

    def plant(self, kappa: float, p2: float) -> TransferFunction:
        den = np.convolve([1.0, -self.p1], [1.0, -p2])
        return TransferFunction([0.0, 0.0, kappa], den, self.ts)

    def draw(self, rng: np.random.Generator):
        return rng.uniform(*self.kappa_range), rng.uniform(*self.p2_range)

    def corners(self) -> list:
        return [self.plant(k, p) for k in self.kappa_range for p in self.p2_range]


def sample_motor(seed: int, family: MotorFamily = MotorFamily()) -> TransferFunction:
    kappa, p2 = family.draw(np.random.default_rng(seed))
    return family.plant(kappa, p2)


def similarity_level(family: MotorFamily = MotorFamily()) -> float:
    """Largest pairwise ``||G_a - G_b||_2`` over the corners of the parameter box."""
    corners = family.corners()
    return max(norm_h2(a - b) for a, b in itertools.combinations(corners, 2))


def snr_db(g: TransferFunction, u, noise_std: float) -> float:
    y = simulate(g, u)
    return float(10.0 * np.log10(np.var(y) / noise_std**2))


# ---------------------------------------------------------------------------
# protocol and metrics


@dataclass(frozen=True)
class Protocol:
    """Data collection and test settings of the benchmark."""

    T: int = 550
    input_std: float = 2.0
    noise_std: float = 10.0
    cl_noise_std: Optional[float] = None
    step: float = 1000.0
    horizon: int = 150
    n_meta: int = 10
    repeats: int = 5
    entry_delta: float = 0.5
    screen_delta: float = 0.95
    cap: float = DEFAULT_CAP

    @property
    def test_noise(self) -> float:
        return self.noise_std if self.cl_noise_std is None else self.cl_noise_std

    @property
    def experiment_seconds(self) -> float:
        return self.T * TS

    def reference(self) -> np.ndarray:
        return np.full(self.horizon, self.step)


@dataclass(frozen=True)
class MatchingError:
    value: float
    raw: float
    unstable: bool

    @property
    def capped(self) -> bool:
        return self.raw > self.value


def matching_error(closed_loop: Dataset, m: TransferFunction, reference=None, cap: float = DEFAULT_CAP):
    """``||y^d - y^cl||_2`` over the test horizon.

    ``value`` is saturated at ``cap``; diverged runs report ``raw = inf``
    and ``value = cap`` with ``unstable`` set.
    """
    ref = closed_loop.reference if reference is None else np.asarray(reference, float)
    if closed_loop.unstable:
        return MatchingError(float(cap), float("inf"), True)
    yd = simulate(m, ref)
    raw = float(np.linalg.norm(yd - closed_loop.y))
    return MatchingError(min(raw, float(cap)), raw, False)


def loop_is_stable(g: TransferFunction, c: TransferFunction) -> bool:
    """Pole test of the true loop; a 3 s test is too short to expose slow divergence."""
    t = feedback(c, g)
    return is_stable(t) or is_stable(t.minreal())


def closed_loop_errors(g, c, m, protocol: Protocol, seeds: Sequence[int]) -> np.ndarray:
    """Raw matching errors of ``c`` on ``g`` for each noise seed.

    Loops that are unstable (by their poles or by divergence) give ``inf``.
    """
    ref = protocol.reference()
    if not loop_is_stable(g, c):
        return np.full(len(seeds), np.inf)
    out = []
    for s in seeds:
        cl = simulate_closed_loop(g, c, ref, protocol.test_noise, s)
        out.append(matching_error(cl, m, ref, protocol.cap).raw)
    return np.array(out)


# ---------------------------------------------------------------------------
# meta-dataset


@dataclass
class MetaBuild:
    meta: MetaDataset
    plants: list
    params: list
    rejected: int


def build_meta_dataset(
    u: np.ndarray,
    protocol: Protocol,
    master: int,
    family: MotorFamily = MotorFamily(),
    n: Optional[int] = None,
    label: str = "meta",
    max_tries: int = 100,
) -> MetaBuild:
    """Sample ``n`` meta-motors, tune each by c-VRFT and record its step test.

    Entries whose test diverges (or whose tuning is infeasible) are
    resampled; the count is returned in ``rejected``.
    """
    n = protocol.n_meta if n is None else n
    m = REFERENCE_MODEL
    entries, plants, params = [], [], []
    rejected = 0
    cfg = EntryConfig(delta=protocol.entry_delta, step=protocol.step, horizon=protocol.horizon,
                      noise_std=protocol.test_noise)
    for k in range(n):
        for attempt in range(max_tries):
            g = sample_motor(derive_seed(master, label, k, attempt, "plant"), family)
            d = generate_open_loop(g, u, protocol.noise_std, derive_seed(master, label, k, attempt, "ol"))
            d_iv = generate_open_loop(g, u, protocol.noise_std, derive_seed(master, label, k, attempt, "iv"))
            try:
                p, cl = build_meta_controller_entry(
                    g, d, d_iv, m, cfg, derive_seed(master, label, k, attempt, "cl")
                )
            except (UnstableEntryError, _conic.SolverError):
                rejected += 1
                continue
            if not loop_is_stable(g, p.to_tf()):
                rejected += 1
                continue
            entries.append(MetaEntry(p, d, cl, protocol.screen_delta))
            plants.append(g)
            params.append(p)
            break
        else:
            raise RuntimeError(f"could not build meta entry {k} after {max_tries} attempts")
    return MetaBuild(MetaDataset(entries), plants, params, rejected)


def common_input(protocol: Protocol, master: int) -> np.ndarray:
    return white_input(protocol.T, protocol.input_std, derive_seed(master, "input"))


# ---------------------------------------------------------------------------
# tuning methods


@dataclass
class Tuned:
    controller: TransferFunction
    seconds: float
    experiments: int
    alpha: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)


def _iv_objective(d, d_iv, meta, white_input=True):
    with warnings.catch_warnings():
        # N PI controllers span a 2-D space, so H is singular by construction for N > 2
        warnings.filterwarnings("ignore", "meta-design Gram matrix", RuntimeWarning)
        return build_iv_objective(d, d_iv, meta, REFERENCE_MODEL, white_input=white_input)


def tune_meta(meta: MetaDataset, d: Dataset, d_iv: Dataset, config: DesignConfig, indices=None) -> Tuned:
    t0 = time.perf_counter()
    m = REFERENCE_MODEL
    obj = _iv_objective(d, d_iv, meta, config.white_input)
    S, J = indices if indices is not None else meta_indices(d, meta, m)
    w, rep = solve_meta(obj, meta, config, d, m, S, J)
    c = materialize_meta_controller(meta, w)
    return Tuned(c, time.perf_counter() - t0, 2, w.alpha,
                 {"delta_hat": rep.delta_hat, "ell": rep.ell, "objective": rep.objective})


def tune_vrft(d: Dataset, d_iv: Optional[Dataset], delta: Optional[float], window: int = 200) -> Tuned:
    t0 = time.perf_counter()
    res = vrft_tune(VrftProblem(d, REFERENCE_MODEL, d_iv, delta=delta, window=window))
    return Tuned(res.params.to_tf(), time.perf_counter() - t0, 2 if d_iv is not None else 1,
                 info={"theta": res.params.theta.tolist(), "ell": res.window})


def trivial_meta(meta: MetaDataset) -> Tuned:
    w = MetaWeights.uniform(len(meta))
    return Tuned(materialize_meta_controller(meta, w), 0.0, 0, w.alpha)


# ---------------------------------------------------------------------------
# reports


@dataclass
class ExperimentReport:
    """Per-seed rows plus a summary; every row carries the seeds that produced it."""

    name: str
    config: dict
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)

    def column(self, key, **where) -> np.ndarray:
        return np.array([r[key] for r in self.rows if all(r.get(k) == v for k, v in where.items())])

    def to_csv(self) -> str:
        keys = []
        for r in self.rows:
            for k in r:
                if k not in keys:
                    keys.append(k)
        buf = io.StringIO()
        wr = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        wr.writeheader()
        for r in self.rows:
            wr.writerow({k: _csv_value(r.get(k, "")) for k in keys})
        return buf.getvalue()

    def to_dict(self, include_timings: bool = False) -> dict:
        rows = self.rows if include_timings else [_strip_timing(r) for r in self.rows]
        summary = self.summary if include_timings else _strip_timing(self.summary)
        return {"name": self.name, "config": self.config, "summary": summary,
                "tables": self.tables, "rows": rows}

    def write(self, directory) -> list:
        """Write ``<name>.csv``, ``<name>.json`` and ``<name>_timings.json``."""
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = []
        det = ExperimentReport(self.name, self.config, [_strip_timing(r) for r in self.rows])
        p = directory / f"{self.name}.csv"
        p.write_text(det.to_csv())
        paths.append(p)
        p = directory / f"{self.name}.json"
        p.write_text(json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n")
        paths.append(p)
        timings = [{k: v for k, v in r.items() if _is_timing(k) or k in ("motor", "method", "run")}
                   for r in self.rows]
        p = directory / f"{self.name}_timings.json"
        p.write_text(json.dumps(_jsonable(timings), indent=2, sort_keys=True) + "\n")
        paths.append(p)
        for tname, table in self.tables.items():
            if isinstance(table, dict) and "header" in table:
                p = directory / f"{self.name}_{tname}.csv"
                buf = io.StringIO()
                wr = csv.writer(buf, lineterminator="\n")
                wr.writerow(table["header"])
                wr.writerows([[_csv_value(x) for x in row] for row in table["rows"]])
                p.write_text(buf.getvalue())
                paths.append(p)
        return paths


def _is_timing(key: str) -> bool:
    return key.endswith("_s") or key.endswith("_ms") or key == "timings"


def _strip_timing(d: dict) -> dict:
    return {k: v for k, v in d.items() if not _is_timing(k)}


def _csv_value(x):
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (list, tuple, np.ndarray)):
        return " ".join(repr(float(v)) for v in np.ravel(x))
    return x


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else ("inf" if v > 0 else ("-inf" if v < 0 else "nan"))
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def worst_finite(values, floor: float) -> float:
    """Largest finite value (at least ``floor``); stands in for unstable runs in averages."""
    v = np.asarray(values, float)
    v = v[np.isfinite(v)]
    return float(max(floor, v.max())) if v.size else float(floor)


def penalized_mean(values, worst: float) -> float:
    v = np.asarray(values, float)
    return float(np.mean(np.where(np.isfinite(v), v, worst)))


def _median(x) -> float:
    return float(np.median(np.asarray(x, float)))


def _fan_out(fn: Callable, tasks: list, jobs: int) -> list:
    """Map ``fn`` over ``tasks``; results keep task order regardless of ``jobs``."""
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as ex:
        return list(ex.map(fn, tasks))


# ---------------------------------------------------------------------------
# experiments


@dataclass(frozen=True)
class _NewMotorTask:
    master: int
    index: int
    protocol: Protocol
    config: DesignConfig
    family: MotorFamily
    methods: tuple
    meta: MetaDataset
    u: np.ndarray
    plant: Optional[TransferFunction] = None
    label: str = "new"


def new_motor_data(master, index, protocol, family, u, plant=None, label="new"):
    g = plant if plant is not None else sample_motor(derive_seed(master, label, index, "plant"), family)
    d = generate_open_loop(g, u, protocol.noise_std, derive_seed(master, label, index, "ol"))
    d_iv = generate_open_loop(g, u, protocol.noise_std, derive_seed(master, label, index, "iv"))
    return g, d, d_iv


def _run_new_motor(task: _NewMotorTask) -> list:
    p = task.protocol
    g, d, d_iv = new_motor_data(task.master, task.index, p, task.family, task.u, task.plant, task.label)
    seeds = [derive_seed(task.master, task.label, task.index, "test", r) for r in range(p.repeats)]
    indices = meta_indices(d, task.meta, REFERENCE_MODEL)
    rows = []
    for method in task.methods:
        name, kind, opts = method
        try:
            if kind == "meta":
                tuned = tune_meta(task.meta, d, d_iv, replace(task.config, **opts), indices)
            elif kind == "vrft":
                tuned = tune_vrft(d, d_iv, opts.get("delta"), task.config.ell)
            elif kind == "trivial":
                tuned = trivial_meta(task.meta)
            else:
                raise ValueError(f"unknown method kind '{kind}'")
            errs = closed_loop_errors(g, tuned.controller, REFERENCE_MODEL, p, seeds)
            failed = ""
        except (_conic.SolverError, ValueError) as exc:
            tuned = None
            errs = np.full(len(seeds), np.inf)
            failed = type(exc).__name__
        capped = np.minimum(errs, p.cap)
        rows.append({
            "motor": task.index,
            "method": name,
            "plant_num": g.num.tolist(),
            "plant_den": g.den.tolist(),
            "seed_ol": derive_seed(task.master, task.label, task.index, "ol"),
            "median_error": _median(errs),
            "mean_error": float(np.mean(errs)),
            "median_error_capped": _median(capped),
            "errors": errs.tolist(),
            "unstable": int(np.sum(~np.isfinite(errs))),
            "failed": failed,
            "alpha": [] if tuned is None or tuned.alpha is None else tuned.alpha.tolist(),
            "experiments": 0 if tuned is None else tuned.experiments,
            "tuning_s": float("nan") if tuned is None else tuned.seconds,
            "total_time_s": float("nan") if tuned is None
            else tuned.seconds + tuned.experiments * p.experiment_seconds,
            "delta_hat": None if tuned is None else tuned.info.get("delta_hat"),
            "ell": None if tuned is None else tuned.info.get("ell"),
            "S": indices[0].tolist(),
            "J": indices[1].tolist(),
        })
    return rows


def _config_echo(**kw) -> dict:
    out = {}
    for k, v in kw.items():
        if hasattr(v, "__dataclass_fields__"):
            out[k] = asdict(v)
        else:
            out[k] = v
    return _jsonable(out)


def _meta_table(build: MetaBuild) -> dict:
    return {
        "header": ["k", "Kp", "Ki", "plant_num", "plant_den"],
        "rows": [[k, p.theta[0], p.theta[1], g.num.tolist(), g.den.tolist()]
                 for k, (p, g) in enumerate(zip(build.params, build.plants))],
    }


def _prepare(master, protocol, family, n_meta=None):
    u = common_input(protocol, master)
    build = build_meta_dataset(u, protocol, master, family, n_meta)
    return u, build


def run_comparison(
    master: int = 1,
    n_new: int = 10,
    protocol: Protocol = Protocol(),
    config: DesignConfig = DesignConfig(),
    family: MotorFamily = MotorFamily(),
    jobs: int = 1,
    include_unregularized: bool = True,
) -> ExperimentReport:
    """Meta-controller vs c-VRFT, plain VRFT and the uniform-weight meta-controller."""
    u, build = _prepare(master, protocol, family)
    methods = [
        ("meta", "meta", {}),
        ("c-vrft", "vrft", {"delta": 0.5}),
        ("vrft", "vrft", {"delta": None}),
        ("trivial", "trivial", {}),
    ]
    if include_unregularized:
        methods.append(("meta-unreg", "meta", {"lambda_j": 0.0, "lambda_s": 0.0}))
    tasks = [_NewMotorTask(master, i, protocol, config, family, tuple(methods), build.meta, u)
             for i in range(n_new)]
    rows = [r for rs in _fan_out(_run_new_motor, tasks, jobs) for r in rs]
    rep = ExperimentReport("comparison", _config_echo(master=master, n_new=n_new, protocol=protocol,
                                                       config=config, family=family), rows)
    rep.tables["meta"] = _meta_table(build)
    rep.summary = _comparison_summary(rep, [m[0] for m in methods], n_new)
    rep.summary["meta_rejected"] = build.rejected
    rep.summary["smgo"] = "not implemented (out of scope)"
    return rep


def _comparison_summary(rep: ExperimentReport, names, n_new) -> dict:
    med = {n: rep.column("median_error", method=n) for n in names}
    out = {
        "median_error": {n: float(np.median(v)) for n, v in med.items()},
        "mean_capped_error": {n: float(np.mean(rep.column("median_error_capped", method=n)))
                              for n in names},
        "unstable_runs": {n: int(rep.column("unstable", method=n).sum()) for n in names},
        "experiments": {n: int(np.max(rep.column("experiments", method=n))) for n in names},
        "mean_tuning_s": {n: float(np.nanmean(rep.column("tuning_s", method=n))) for n in names},
    }
    if "meta" in med:
        for other in names:
            if other != "meta":
                out[f"meta_beats_{other}"] = int(np.sum(med["meta"] < med[other]))
    return out


def run_non_deteriorating(
    master: int = 1,
    lambda_s_values: Sequence[float] = (300.0, 3000.0),
    protocol: Protocol = Protocol(),
    config: DesignConfig = DesignConfig(),
    family: MotorFamily = MotorFamily(),
    noise_free: bool = False,
    jobs: int = 1,
) -> ExperimentReport:
    """New motor equal to meta-motor ``k``; meta error vs. that entry's own controller."""
    if noise_free:
        protocol = replace(protocol, noise_std=0.0, cl_noise_std=0.0, repeats=1)
    u, build = _prepare(master, protocol, family)
    rows = []
    for k, g in enumerate(build.plants):
        own = build.params[k].to_tf()
        for ls in lambda_s_values:
            cfg = replace(config, lambda_s=float(ls))
            task = _NewMotorTask(master, k, protocol, cfg, family,
                                 (("meta", "meta", {}),), build.meta, u, plant=g, label="equal")
            row = _run_new_motor(task)[0]
            seeds = [derive_seed(master, "equal", k, "test", r) for r in range(protocol.repeats)]
            own_err = closed_loop_errors(g, own, REFERENCE_MODEL, protocol, seeds)
            row.update({"lambda_s": float(ls), "own_median_error": _median(own_err),
                        "non_deteriorating": bool(row["median_error"] <= _median(own_err))})
            if noise_free:
                _, d, d_iv = new_motor_data(master, k, protocol, family, u, g, "equal")
                obj = _iv_objective(d, d_iv, build.meta)
                cfg0 = replace(config, lambda_j=0.0, lambda_s=0.0)
                w, _ = solve_meta(obj, build.meta, cfg0, d, REFERENCE_MODEL)
                row["objective_opt"] = obj(w.alpha)
                row["objective_own"] = obj(MetaWeights.vertex(len(build.meta), k).alpha)
            rows.append(row)
    rep = ExperimentReport("nondet", _config_echo(master=master, lambda_s=list(lambda_s_values),
                                                   protocol=protocol, config=config,
                                                   noise_free=noise_free), rows)
    rep.summary = {
        f"non_deteriorating_ls{ls:g}": int(sum(r["non_deteriorating"] for r in rows
                                               if r["lambda_s"] == ls))
        for ls in lambda_s_values
    }
    if noise_free:
        rep.summary["objective_not_worse"] = int(sum(
            r["objective_opt"] <= r["objective_own"] + 1e-9 for r in rows
            if r["lambda_s"] == lambda_s_values[0]))
    return rep


def run_sensitivity(
    master: int = 1,
    lambda_s_values: Sequence[float] = (0, 3, 30, 300, 3000, 30000),
    lambda_j_values: Sequence[float] = (0, 3, 30, 300),
    n_new: int = 10,
    protocol: Protocol = Protocol(),
    config: DesignConfig = DesignConfig(),
    family: MotorFamily = MotorFamily(),
    jobs: int = 1,
) -> ExperimentReport:
    """Average capped matching error over new motors for each ``(lambda_s, lambda_j)``."""
    u, build = _prepare(master, protocol, family)
    methods = tuple(
        (f"ls={ls:g},lj={lj:g}", "meta", {"lambda_s": float(ls), "lambda_j": float(lj)})
        for lj in lambda_j_values for ls in lambda_s_values
    )
    tasks = [_NewMotorTask(master, i, protocol, config, family, methods, build.meta, u)
             for i in range(n_new)]
    rows = [r for rs in _fan_out(_run_new_motor, tasks, jobs) for r in rs]
    rep = ExperimentReport("sensitivity", _config_echo(master=master, lambda_s=list(lambda_s_values),
                                                        lambda_j=list(lambda_j_values), n_new=n_new,
                                                        protocol=protocol, config=config), rows)
    worst = worst_finite(rep.column("median_error"), protocol.cap)
    grid = np.zeros((len(lambda_j_values), len(lambda_s_values)))
    capped = np.zeros_like(grid)
    for i, lj in enumerate(lambda_j_values):
        for j, ls in enumerate(lambda_s_values):
            name = f"ls={ls:g},lj={lj:g}"
            grid[i, j] = penalized_mean(rep.column("median_error", method=name), worst)
            capped[i, j] = float(np.mean(rep.column("median_error_capped", method=name)))
    header = ["lambda_j"] + [f"lambda_s={ls:g}" for ls in lambda_s_values]
    rep.tables["heatmap"] = {
        "header": header,
        "rows": [[float(lj)] + capped[i].tolist() for i, lj in enumerate(lambda_j_values)],
    }
    rep.tables["heatmap_uncapped"] = {
        "header": header,
        "rows": [[float(lj)] + grid[i].tolist() for i, lj in enumerate(lambda_j_values)],
    }
    bi, bj = np.unravel_index(np.argmin(grid), grid.shape)
    rep.summary = {"grid": grid.tolist(), "grid_capped": capped.tolist(),
                   "best": {"lambda_j": float(lambda_j_values[bi]),
                            "lambda_s": float(lambda_s_values[bj]),
                            "error": float(grid[bi, bj])}}
    return rep


def run_size_sweep(
    master: int = 1,
    sizes: Sequence[int] = tuple(range(2, 16)),
    n_new: int = 10,
    protocol: Protocol = Protocol(),
    config: DesignConfig = DesignConfig(),
    family: MotorFamily = MotorFamily(),
    jobs: int = 1,
    n_draws: int = 1,
) -> ExperimentReport:
    """Matching error vs. meta-dataset size on nested meta-datasets.

    With ``n_draws > 1`` the sweep is repeated on independently drawn
    meta-datasets (draw 0 uses ``master`` itself) and averaged.
    """
    rows = []
    for draw in range(n_draws):
        dm = master if draw == 0 else derive_seed(master, "draw", draw)
        u, build = _prepare(dm, protocol, family, max(sizes))
        for n in sizes:
            sub = build.meta.subset(range(n))
            tasks = [_NewMotorTask(dm, i, protocol, config, family, (("meta", "meta", {}),), sub, u)
                     for i in range(n_new)]
            for rs in _fan_out(_run_new_motor, tasks, jobs):
                for r in rs:
                    r["N"] = int(n)
                    r["draw"] = draw
                    rows.append(r)
    rep = ExperimentReport("size", _config_echo(master=master, sizes=list(sizes), n_new=n_new,
                                                 n_draws=n_draws, protocol=protocol, config=config),
                           rows)
    worst = worst_finite(rep.column("median_error"), protocol.cap)
    avg = {int(n): penalized_mean(rep.column("median_error", N=int(n)), worst) for n in sizes}
    capped = {int(n): float(np.mean(rep.column("median_error_capped", N=int(n)))) for n in sizes}
    rep.summary = {"average_error": avg, "average_error_capped": capped,
                   "unstable": {int(n): int(np.sum(~np.isfinite(rep.column("median_error", N=int(n)))))
                                for n in sizes}}
    rep.tables["curve"] = {"header": ["N", "average_error", "average_error_capped"],
                           "rows": [[n, avg[n], capped[n]] for n in avg]}
    return rep


def run_stability_study(
    master: int = 1,
    n_new: int = 10,
    noise_std: float = 40.0,
    delta: float = 0.5,
    protocol: Protocol = Protocol(),
    config: DesignConfig = DesignConfig(),
    family: MotorFamily = MotorFamily(),
    jobs: int = 1,
    outlier_factor: float = 1.5,
) -> ExperimentReport:
    """Meta-design with and without the stability bound on noisier new-plant data.

    The meta-dataset is built with the nominal protocol; only the new
    plant's open-loop data see ``noise_std``.
    """
    u, build = _prepare(master, protocol, family)
    noisy = replace(protocol, noise_std=noise_std, cl_noise_std=protocol.test_noise)
    methods = (("meta", "meta", {"delta": None}), ("c-meta", "meta", {"delta": delta}))
    tasks = [_NewMotorTask(master, i, noisy, config, family, methods, build.meta, u, label="noisy")
             for i in range(n_new)]
    rows = [r for rs in _fan_out(_run_new_motor, tasks, jobs) for r in rs]
    rep = ExperimentReport("stability", _config_echo(master=master, n_new=n_new, noise_std=noise_std,
                                                      delta=delta, protocol=protocol, config=config),
                           rows)
    summ = {}
    for name in ("meta", "c-meta"):
        # an infeasible design never reaches the plant: its runs are not counted as outliers
        deployed = [r for r in rows if r["method"] == name and not r["failed"]]
        errs = np.concatenate([np.asarray(r["errors"], float) for r in deployed] or [np.zeros(0)])
        med = float(np.median(errs)) if errs.size else float("nan")
        summ[name] = {
            "median": med,
            "outliers": int(np.sum(errs > outlier_factor * med)),
            "runs": int(errs.size),
            "not_deployed": sum(1 for r in rows if r["method"] == name and r["failed"]),
            "unstable": int(np.sum(~np.isfinite(errs))),
            "iqr": float(np.subtract(*np.percentile(np.minimum(errs, 1e12), [75, 25]))),
        }
    pairs = [(a["alpha"], b["alpha"]) for a, b in zip(rows[0::2], rows[1::2]) if a["alpha"] and b["alpha"]]
    if pairs:
        summ["max_alpha_change"] = float(max(np.max(np.abs(np.subtract(a, b))) for a, b in pairs))
    rep.summary = summ
    return rep


EXPERIMENTS = {
    "comparison": run_comparison,
    "nondet": run_non_deteriorating,
    "sensitivity": run_sensitivity,
    "size": run_size_sweep,
    "stability": run_stability_study,
}
