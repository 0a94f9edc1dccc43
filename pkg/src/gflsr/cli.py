"""Command-line entry point.

Exit codes: 0 on success, 2 on a configuration or input error, 3 on a
numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .core import Dataset, NumericalError
from .experiments import ExperimentConfig, run
from .fit import FitConfig, GflsrFitConfig, fit_gflsr, fit_pls, predict
from .inference import corrected_estimates, intervals, residual_bootstrap
from .io import dumps, load_csv, load_fit, read_table, save_csv, save_fit, write_table
from .simulate import GflsrScenario, NoiseSpec, random_params, simulate_gflsr, simulate_pls

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

_FIT_KEYS = {f for f in FitConfig.__dataclass_fields__}
_GFLSR_KEYS = {f for f in GflsrFitConfig.__dataclass_fields__}


def _config(args, kind: str) -> ExperimentConfig:
    d = {}
    if getattr(args, "config", None):
        d = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if d.get("kind", kind) != kind:
            raise ValueError(f"config kind {d['kind']!r} does not match command {kind!r}")
    d["kind"] = kind
    for key in ("seed", "reps", "out", "workers", "B", "H"):
        val = getattr(args, key, None)
        if val is not None:
            d[key] = val
    return ExperimentConfig.from_dict(d)


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _load_data(path, opt: dict) -> Dataset:
    if not path:
        raise ValueError("--data is required")
    return load_csv(path, p=opt.get("p"))


def _fit(data: Dataset, cfg: ExperimentConfig):
    opt = cfg.options
    if opt.get("model", "pls") == "gflsr":
        kw = {k: v for k, v in opt.items() if k in _GFLSR_KEYS and k != "H"}
        return fit_gflsr(data, GflsrFitConfig(H=int(cfg.H), **kw))
    kw = {k: v for k, v in opt.items() if k in _FIT_KEYS and k != "H"}
    return fit_pls(data, FitConfig(H=int(cfg.H), **kw))


def cmd_simulate(args) -> None:
    cfg = _config(args, "simulate")
    opt = cfg.options
    n = int(opt.get("n", 100))
    rng = np.random.default_rng(int(cfg.seed))
    if opt.get("scenario"):
        data, _ = simulate_gflsr(GflsrScenario(opt["scenario"]), n, rng)
    else:
        params = random_params(int(opt.get("p", 10)), int(opt.get("q", 10)), int(cfg.H), rng)
        noise = NoiseSpec("B", float(opt.get("sigma_x_sq", 0.1)), float(opt.get("sigma_y_sq", 0.1)),
                          sigma1_sq=float(opt.get("sigma1_sq", 0.1)),
                          latent_dist=opt.get("latent_dist", "normal"))
        data, _ = simulate_pls(params, n, noise, rng)
    if not cfg.out:
        raise ValueError("--out is required for simulate")
    save_csv(data, cfg.out)


def cmd_fit(args) -> None:
    cfg = _config(args, "fit")
    opt = {**cfg.options, **{k: v for k, v in (("p", args.p), ("variant", args.variant),
                                                ("deflation", args.deflation)) if v is not None}}
    cfg.options = opt
    data = _load_data(args.data, opt)
    fit = _fit(data, cfg)
    if cfg.out:
        save_fit(fit, cfg.out)
    summary = {"H": fit.H, "n": fit.n, "b_hat": fit.b_hat,
               "U_hat": fit.U_hat, "V_hat": fit.V_hat}
    if opt.get("corrected", True):
        ce = corrected_estimates(fit, opt.get("assumption", "B"))
        summary["corrected"] = ce
    sys.stdout.write(dumps(summary) + "\n")


def cmd_predict(args) -> None:
    fit = load_fit(args.fit)
    header, X = read_table(args.data)
    p = fit.U_hat.shape[0]
    if X.shape[1] < p:
        raise ValueError(f"need {p} predictor columns, got {X.shape[1]}")
    Y = predict(fit, X[:, :p])
    buf = Path(args.out) if args.out else None
    cols = [f"y{j + 1}" for j in range(Y.shape[1])]
    if buf is not None:
        write_table(buf, cols, Y)
    else:
        sys.stdout.write(",".join(cols) + "\n")
        for row in Y:
            sys.stdout.write(",".join(repr(float(v)) for v in row) + "\n")


def cmd_bootstrap(args) -> None:
    cfg = _config(args, "bootstrap")
    opt = {**cfg.options, **({"p": args.p} if args.p is not None else {})}
    cfg.options = opt
    if not cfg.B:
        cfg.B = 100
    data = _load_data(args.data, opt)
    fit = _fit(data, cfg)
    boot = residual_bootstrap(fit, int(cfg.B), seed=int(cfg.seed), workers=cfg.workers,
                              ci_level=float(opt.get("level", 0.95)))
    tab = intervals(boot, assumption=opt.get("assumption", "B"))
    if cfg.out:
        save_csv(tab, cfg.out)
    else:
        sys.stdout.write("parameter,index,lower,point,upper\n")
        for name, idx, lo, pt, up in tab.rows():
            sys.stdout.write(f"{name},{idx},{lo!r},{pt!r},{up!r}\n")


def cmd_bench(args) -> None:
    cfg = _config(args, args.which)
    report = run(cfg)
    if not cfg.out:
        sys.stdout.write(report.to_csv())


def cmd_corn(args) -> None:
    cfg = _config(args, "corn")
    if args.x:
        cfg.options["x_path"] = args.x
    if args.y:
        cfg.options["y_path"] = args.y
    report = run(cfg)
    if not cfg.out:
        sys.stdout.write(report.to_csv())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gflsr", description="Generative PLS and GFLSR tools")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, reps=False):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output file or directory")
        p.add_argument("--workers", type=int)
        if reps:
            p.add_argument("--reps", type=int)

    p = sub.add_parser("simulate", help="draw a dataset and write it as CSV")
    common(p)
    p.add_argument("--H", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="fit a model to a CSV dataset")
    common(p)
    p.add_argument("--data")
    p.add_argument("--p", type=int, help="number of predictor columns")
    p.add_argument("--H", type=int)
    p.add_argument("--variant", choices=["PLS_R", "PLS_SVD"])
    p.add_argument("--deflation", choices=["weights", "scores"])
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict responses from a saved fit")
    p.add_argument("--fit", required=True)
    p.add_argument("--data", required=True, help="CSV whose first p columns are predictors")
    p.add_argument("--out")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bootstrap", help="residual bootstrap intervals for a fit")
    common(p)
    p.add_argument("--data")
    p.add_argument("--p", type=int)
    p.add_argument("--H", type=int)
    p.add_argument("--B", type=int)
    p.set_defaults(func=cmd_bootstrap)

    p = sub.add_parser("bench", help="run a simulation study")
    p.add_argument("which", choices=["sim1", "sim2", "sim3", "sim4"])
    common(p, reps=True)
    p.add_argument("--B", type=int)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("corn", help="NIR corn calibration (80x700 spectra, 80x4 responses)")
    common(p)
    p.add_argument("--x", help="spectra CSV")
    p.add_argument("--y", help="responses CSV")
    p.add_argument("--B", type=int)
    p.add_argument("--H", type=int)
    p.set_defaults(func=cmd_corn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else 0
    try:
        args.func(args)
    except (NumericalError, np.linalg.LinAlgError) as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError, FileNotFoundError, json.JSONDecodeError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    return 0


if __name__ == "__main__":
    sys.exit(main())
