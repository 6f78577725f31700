"""Command-line front end.

Every subcommand writes into ``<runs-dir>/<name>/`` with the layout
``config.json``, ``datasets/``, ``controllers/`` and ``reports/``. Any flag
can also be set through an environment variable ``METAVRFT_<FLAG>`` (dashes
become underscores), which an explicit flag overrides.

Exit codes: 0 success, 1 numerical or solver failure, 2 usage error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import bench
from ._conic import SolverError
from .lti import LTIError
from .metadesign import (
    NORMALIZATIONS,
    DesignConfig,
    MetaDataset,
    MetaDesignError,
    MetaVRFT,
    MetaWeights,
    save_solution,
)
from .signals import generate_open_loop, load_dataset, save_dataset
from .spectral import SpectralError
from .vrft import VRFT, VRFTError

log = logging.getLogger("metavrft")

ENV_PREFIX = "METAVRFT_"
EXIT_OK, EXIT_NUMERIC, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3

# flags that never influence results and are kept out of provenance echoes
_VOLATILE = {"jobs", "verbose", "func", "timings"}


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument helpers


def _optional_float(text: str):
    if text.lower() in ("none", "off", ""):
        return None
    return float(text)


def _float_list(text: str) -> list:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _int_list(text: str) -> list:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return out


def _apply_env(parser: argparse.ArgumentParser):
    """Use ``METAVRFT_*`` variables as defaults for the parser's options."""
    for action in parser._actions:
        if not action.option_strings or action.dest in ("help",):
            continue
        var = ENV_PREFIX + action.dest.upper()
        if var not in os.environ:
            continue
        raw = os.environ[var]
        if isinstance(action, argparse._StoreTrueAction):
            value = raw.lower() in ("1", "true", "yes", "on")
        elif action.type is not None:
            try:
                value = action.type(raw)
            except (ValueError, argparse.ArgumentTypeError) as exc:
                parser.error(f"invalid value in {var}: {exc}")
        else:
            value = raw
        if action.choices is not None and value not in action.choices:
            parser.error(f"invalid value in {var}: {raw!r}")
        parser.set_defaults(**{action.dest: value})


def _common(p: argparse.ArgumentParser, seed_default: int = 1):
    p.add_argument("--seed", type=int, default=seed_default, help="master seed")
    p.add_argument("--runs-dir", type=Path, default=Path("runs"))
    p.add_argument("--name", default=None, help="run name (default: <command>-seed<seed>)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for experiment fan-out")
    p.add_argument("-v", "--verbose", action="store_true")


def _protocol_flags(p: argparse.ArgumentParser):
    p.add_argument("--t", type=int, default=550, help="open-loop samples")
    p.add_argument("--noise", type=float, default=10.0, help="output noise std")
    p.add_argument("--input-std", type=float, default=2.0)
    p.add_argument("--input-seed", type=int, default=None,
                   help="seed of the shared excitation (default: --seed); new-plant data "
                        "must reuse the meta-dataset's input")


def _design_flags(p: argparse.ArgumentParser):
    p.add_argument("--lambda-j", type=float, default=30.0)
    p.add_argument("--lambda-s", type=float, default=300.0)
    p.add_argument("--delta", type=_optional_float, default=None, help="stability bound or 'none'")
    p.add_argument("--ell", type=int, default=200, help="correlation window")
    p.add_argument("--normalize", choices=NORMALIZATIONS, default="mean")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="metavrft", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="simulate an open-loop experiment on a family plant")
    _common(p)
    _protocol_flags(p)
    p.add_argument("--family", choices=["dc-motor"], default="dc-motor")
    p.add_argument("--kappa", type=float, default=None, help="fix the gain instead of sampling it")
    p.add_argument("--p2", type=float, default=None, help="fix the second pole instead of sampling it")
    p.add_argument("--iv", action="store_true", help="also write the repeated experiment")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("vrft", help="tune a PI controller by VRFT / IV / c-VRFT")
    _common(p)
    p.add_argument("--data", type=Path, required=True, help="dataset stem (without extension)")
    p.add_argument("--data-iv", type=Path, default=None)
    p.add_argument("--delta", type=_optional_float, default=None)
    p.add_argument("--window", type=int, default=200)
    p.set_defaults(func=cmd_vrft)

    p = sub.add_parser("build-meta", help="build a meta-dataset from sampled family plants")
    _common(p)
    _protocol_flags(p)
    p.add_argument("--n", type=int, default=10, help="number of entries")
    p.add_argument("--entry-delta", type=float, default=0.5)
    p.set_defaults(func=cmd_build_meta)

    p = sub.add_parser("meta-tune", help="solve the meta-design for a new plant")
    _common(p)
    _design_flags(p)
    p.add_argument("--meta", type=Path, required=True, help="meta-dataset directory")
    p.add_argument("--data", type=Path, required=True)
    p.add_argument("--data-iv", type=Path, required=True)
    p.add_argument("--screen", action="store_true", help="drop entries failing their own bound")
    p.set_defaults(func=cmd_meta_tune)

    p = sub.add_parser("experiment", help="run a benchmark study end to end")
    p.add_argument("which", help=f"one of {sorted(bench.EXPERIMENTS)}")
    _common(p)
    _design_flags(p)
    p.add_argument("--n-new", type=int, default=10)
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--ls", type=_float_list, default=None, help="lambda_S grid (sensitivity, nondet)")
    p.add_argument("--lj", type=_float_list, default=None, help="lambda_J grid (sensitivity)")
    p.add_argument("--sizes", type=_int_list, default=None, help="meta sizes, e.g. 2-10,15")
    p.add_argument("--n-draws", type=int, default=10, help="meta-dataset draws (size)")
    p.add_argument("--high-noise", type=float, default=40.0, help="noise std (stability)")
    p.add_argument("--noise-free", action="store_true", help="noise-free data (nondet)")
    p.add_argument("--timings", action="store_true", help="print tuning times")
    p.set_defaults(func=cmd_experiment)

    for sp in sub.choices.values():
        _apply_env(sp)
    return parser


# ---------------------------------------------------------------------------
# run directory


def _echo(args) -> dict:
    out = {}
    for k, v in sorted(vars(args).items()):
        if k in _VOLATILE:
            continue
        out[k] = str(v) if isinstance(v, Path) else v
    return out


def _run_dir(args) -> Path:
    name = args.name or f"{args.command}-seed{args.seed}"
    root = args.runs_dir / name
    for sub in ("datasets", "controllers", "reports"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    (root / "config.json").write_text(json.dumps(_echo(args), indent=2, sort_keys=True) + "\n")
    return root


def _require_dataset(stem: Path):
    for ext in (".csv", ".json"):
        if not stem.with_suffix(ext).is_file():
            raise FileNotFoundError(f"missing dataset file {stem.with_suffix(ext)}")


def _write_json(path: Path, obj):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _input_seed(args) -> int:
    return args.seed if args.input_seed is None else args.input_seed


def _protocol(args, **kw) -> bench.Protocol:
    base = dict(T=getattr(args, "t", 550), input_std=getattr(args, "input_std", 2.0),
                noise_std=getattr(args, "noise", 10.0))
    base.update(kw)
    return bench.Protocol(**base)


# ---------------------------------------------------------------------------
# commands


def cmd_generate(args) -> int:
    if args.t < 2 or args.noise < 0 or args.input_std <= 0:
        raise UsageError("need --t >= 2, --noise >= 0 and --input-std > 0")
    family = bench.MotorFamily()
    rng = np.random.default_rng(bench.derive_seed(args.seed, "generate", "plant"))
    kappa, p2 = family.draw(rng)
    kappa = kappa if args.kappa is None else args.kappa
    p2 = p2 if args.p2 is None else args.p2
    lo, hi = family.kappa_range
    if not lo <= kappa <= hi or not family.p2_range[0] <= p2 <= family.p2_range[1]:
        raise UsageError(f"plant parameters outside the family box: kappa={kappa}, p2={p2}")
    g = family.plant(kappa, p2)
    root = _run_dir(args)
    u = bench.common_input(_protocol(args), _input_seed(args))
    d = generate_open_loop(g, u, args.noise, bench.derive_seed(args.seed, "generate", "ol"))
    save_dataset(d, root / "datasets" / "open_loop")
    if args.iv:
        d_iv = generate_open_loop(g, u, args.noise, bench.derive_seed(args.seed, "generate", "iv"))
        save_dataset(d_iv, root / "datasets" / "open_loop_iv")
    _write_json(root / "datasets" / "plant.json",
                {"kappa": kappa, "p2": p2, "plant": g.to_dict(), "provenance": _echo(args)})
    print(f"wrote {len(d)} samples to {root / 'datasets'}")
    return EXIT_OK


def cmd_vrft(args) -> int:
    if args.delta is not None and not 0 < args.delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    _require_dataset(args.data)
    if args.data_iv is not None:
        _require_dataset(args.data_iv)
    d = load_dataset(args.data)
    d_iv = load_dataset(args.data_iv) if args.data_iv is not None else None
    root = _run_dir(args)
    est = VRFT(bench.REFERENCE_MODEL, delta=args.delta, window=args.window).fit(d, d_iv)
    out = {"controller": est.params_.to_dict(), "window": est.window_,
           "delta_hat": est.delta_hat_, "provenance": _echo(args)}
    _write_json(root / "controllers" / "vrft.json", out)
    kp, ki = est.params_.theta[:2]
    msg = f"Kp={kp:.6g} Ki={ki:.6g}"
    if est.delta_hat_ is not None:
        msg += f" delta_hat={est.delta_hat_:.4g}"
    print(msg)
    return EXIT_OK


def cmd_build_meta(args) -> int:
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    if not 0 < args.entry_delta < 1:
        raise UsageError("--entry-delta must lie in (0, 1)")
    protocol = _protocol(args, n_meta=args.n, entry_delta=args.entry_delta)
    root = _run_dir(args)
    u = bench.common_input(protocol, _input_seed(args))
    build = bench.build_meta_dataset(u, protocol, args.seed, n=args.n)
    build.meta.save(root / "datasets" / "meta")
    _write_json(root / "controllers" / "meta_controllers.json", {
        "controllers": [p.to_dict() for p in build.params],
        "plants": [g.to_dict() for g in build.plants],
        "rejected": build.rejected,
        "provenance": _echo(args),
    })
    print(f"meta-dataset with {len(build.meta)} entries ({build.rejected} rejected) "
          f"in {root / 'datasets' / 'meta'}")
    return EXIT_OK


def cmd_meta_tune(args) -> int:
    if args.delta is not None and not 0 < args.delta < 1:
        raise UsageError("--delta must lie in (0, 1)")
    if args.meta.name == "meta.json":
        args.meta = args.meta.parent
    if not (args.meta / "meta.json").is_file():
        raise FileNotFoundError(f"no meta.json in {args.meta}")
    _require_dataset(args.data)
    _require_dataset(args.data_iv)
    meta = MetaDataset.load(args.meta)
    d, d_iv = load_dataset(args.data), load_dataset(args.data_iv)
    root = _run_dir(args)
    est = MetaVRFT(meta, bench.REFERENCE_MODEL, args.lambda_j, args.lambda_s, args.delta, args.ell,
                   normalize=args.normalize, screen=args.screen).fit(d, d_iv)
    save_solution(root / "reports" / "solution.json", MetaWeights(est.alpha_), est.report_,
                  include_timings=False)
    _write_json(root / "reports" / "solution_timings.json", est.report_.timings_ms)
    ctrl = {"controller": est.controller_.to_dict(), "dropped": est.dropped_,
            "provenance": _echo(args)}
    if est.params_ is not None:
        ctrl["params"] = est.params_.to_dict()
    _write_json(root / "controllers" / "meta.json", ctrl)
    print("alpha=" + np.array2string(est.alpha_, precision=4, separator=","))
    if est.report_.delta_hat is not None:
        print(f"delta_hat={est.report_.delta_hat:.6g}")
    print(f"objective={est.report_.objective:.6g}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    if args.which not in bench.EXPERIMENTS:
        raise UsageError(f"unknown experiment '{args.which}'; choose from {sorted(bench.EXPERIMENTS)}")
    if args.jobs < 1 or args.n_new < 1 or args.repeats < 1:
        raise UsageError("--jobs, --n-new and --repeats must be positive")
    protocol = bench.Protocol(repeats=args.repeats)
    config = DesignConfig(lambda_j=args.lambda_j, lambda_s=args.lambda_s, delta=args.delta,
                          ell=args.ell, normalize=args.normalize)
    kw = dict(master=args.seed, protocol=protocol, config=config, jobs=args.jobs)
    which = args.which
    if which == "comparison":
        kw["n_new"] = args.n_new
    elif which == "nondet":
        kw["noise_free"] = args.noise_free
        if args.ls:
            kw["lambda_s_values"] = tuple(args.ls)
    elif which == "sensitivity":
        kw["n_new"] = args.n_new
        if args.ls:
            kw["lambda_s_values"] = tuple(args.ls)
        if args.lj:
            kw["lambda_j_values"] = tuple(args.lj)
    elif which == "size":
        kw.update(n_new=args.n_new, n_draws=args.n_draws)
        if args.sizes:
            if min(args.sizes) < 1:
                raise UsageError("--sizes must be positive")
            kw["sizes"] = tuple(args.sizes)
    elif which == "stability":
        kw.update(n_new=args.n_new, noise_std=args.high_noise, delta=args.delta or 0.5,
                  config=replace(config, delta=None))
    root = _run_dir(args)
    rep = bench.EXPERIMENTS[which](**kw)
    paths = rep.write(root / "reports")
    summary = rep.to_dict(include_timings=args.timings)["summary"]
    print(json.dumps(bench._jsonable(summary), indent=1, sort_keys=True))
    print(f"reports: {', '.join(str(p) for p in paths)}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, (UsageError, argparse.ArgumentTypeError)):
        return EXIT_USAGE
    if isinstance(exc, (OSError, json.JSONDecodeError)):
        return EXIT_IO
    if isinstance(exc, (SolverError, VRFTError, MetaDesignError, SpectralError, LTIError,
                        np.linalg.LinAlgError, FloatingPointError, RuntimeError)):
        return EXIT_NUMERIC
    if isinstance(exc, (ValueError, KeyError)):
        return EXIT_USAGE
    return EXIT_NUMERIC


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # mapped to the documented exit codes
        code = _exit_code(exc)
        print(f"metavrft {args.command}: error: {exc}", file=sys.stderr)
        if args.verbose:
            log.exception("details")
        return code


if __name__ == "__main__":
    sys.exit(main())
