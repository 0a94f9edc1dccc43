"""Seeded Monte Carlo experiments and the NIR calibration pipeline.

Every repetition draws from its own generator keyed by (seed, experiment,
cell, repetition), so results do not depend on worker scheduling and a
repeated run reproduces the report byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .core import Dataset, ModelParams, random_orthonormal, sample_inverse_wishart
from .fit import FitConfig, fit_pls, loading_distance
from .inference import (align_signs, corrected_estimates, intervals, mean_interval,
                        predict_interval, residual_bootstrap)
from .io import fmt, read_table, write_table
from .simulate import (SIM3_B, SIM3_SXI, NoiseSpec, draw_pls_rows, noise_rate_spec,
                       random_params, sim3_params, simulate_pls)

KINDS = ("sim1", "sim2", "sim3", "sim4", "corn", "fit", "bootstrap", "simulate")
_TAGS = {"sim1": 1, "sim2": 2, "sim3": 3, "sim4": 4}

_DEFAULTS = {
    "sim1": {"reps": 50, "n_grid": [50, 200, 1000, 5000], "H": 2,
             "options": {"p": 10, "q": 10, "noise": ["0.01", "2", "iw", "exp"],
                         "s_range": [6.0, 10.0], "b_range": [0.5, 2.0], "min_ratio": 2.0,
                         "iw_scale": 1.0, "exp_noise": 0.1, "orthogonal_scores": True}},
    "sim2": {"reps": 50, "n_grid": [50, 100, 1000, 5000, 10000], "H": 3,
             "options": {"p": 20, "q": 20, "noise": [1.0, 15.0],
                         "sigma_xi_sq": [5.0, 3.0, 2.0], "B": [9.0, 6.0, 4.0]}},
    "sim3": {"reps": 100, "n_grid": [50, 1000], "H": 3,
             "options": {"alpha": [0.1, 0.5], "cases": ["B", "C"], "case_c_n": [1000],
                         "iw_alpha": 0.5}},
    "sim4": {"reps": 1, "n_grid": [1000], "H": 3, "B": 100,
             "options": {"alpha": 0.1, "n_test": 10, "level": 0.95, "orthogonal_scores": True,
                         "diagnostic": True}},
    "corn": {"reps": 1, "n_grid": [], "H": 4, "B": 0,
             "options": {"x_path": None, "y_path": None, "wavelength_start": 1100.0,
                         "wavelength_step": 2.0}},
}


@dataclass
class ExperimentConfig:
    """Declarative experiment description.

    ``options`` holds the kind-specific settings; missing keys take the
    defaults for the kind.
    """

    kind: str
    seed: int = 0
    reps: Optional[int] = None
    n_grid: Optional[list] = None
    H: Optional[int] = None
    B: int = 0
    workers: int = 1
    out: Optional[str] = None
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown experiment kind {self.kind!r}")
        d = _DEFAULTS.get(self.kind, {})
        if self.reps is None:
            self.reps = d.get("reps", 1)
        if self.n_grid is None:
            self.n_grid = list(d.get("n_grid", []))
        if self.H is None:
            self.H = d.get("H", 1)
        if not self.B:
            self.B = d.get("B", 0)
        self.options = {**d.get("options", {}), **self.options}
        if int(self.reps) < 1:
            raise ValueError("reps must be >= 1")
        if int(self.seed) < 0:
            raise ValueError("seed must be >= 0")
        if any(b <= a for a, b in zip(self.n_grid, self.n_grid[1:])):
            raise ValueError("n_grid must be strictly ascending")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        known = {"kind", "seed", "reps", "n_grid", "H", "B", "workers", "out", "options"}
        extra = {k: d.pop(k) for k in list(d) if k not in known}
        if "kind" not in d:
            raise KeyError("config needs a 'kind'")
        opts = {**d.pop("options", {}), **extra}
        return cls(**d, options=opts)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


_COLUMNS = ("config_id", "n", "noise", "metric", "mean", "q025", "q975", "reps", "skew")


@dataclass
class Report:
    """Per-cell summaries of an experiment, with the seed for the audit trail."""

    kind: str
    seed: int
    reps: int
    rows: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def add(self, config_id: str, n, noise, metric: str, values, keep_raw: bool = False) -> dict:
        v = np.asarray(values, dtype=float).ravel()
        mean = float(np.mean(v))
        lo, hi = (float(x) for x in np.quantile(v, [0.025, 0.975]))
        row = {"config_id": config_id, "n": int(n), "noise": str(noise), "metric": metric,
               "mean": mean, "q025": lo, "q975": hi, "reps": int(v.size),
               "skew": bool(not lo <= mean <= hi)}
        self.rows.append(row)
        if keep_raw:
            self.raw[f"{config_id}|{n}|{noise}|{metric}"] = v.tolist()
        return row

    def get(self, config_id=None, n=None, noise=None, metric=None) -> dict:
        """The unique row matching every given key."""
        hits = [r for r in self.rows
                if (config_id is None or r["config_id"] == config_id)
                and (n is None or r["n"] == int(n))
                and (noise is None or r["noise"] == str(noise))
                and (metric is None or r["metric"] == metric)]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match")
        return hits[0]

    def to_csv(self, path=None) -> str:
        """Long-format CSV; written to ``path`` when given, always returned."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("seed",) + _COLUMNS)
        for r in self.rows:
            w.writerow([self.seed] + [fmt(r[c]) if isinstance(r[c], float) else r[c]
                                      for c in _COLUMNS])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text, encoding="utf-8")
        return text

    def to_json(self) -> str:
        return json.dumps({"kind": self.kind, "seed": self.seed, "reps": self.reps,
                           "rows": self.rows, "raw": self.raw, "extra": self.extra},
                          indent=1, sort_keys=True)


def _pmap(fn, items, workers: int):
    """Map preserving input order whatever the worker count."""
    items = list(items)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _rng(cfg: ExperimentConfig, *key) -> np.random.Generator:
    return np.random.default_rng([int(cfg.seed), _TAGS[cfg.kind], *[int(k) for k in key]])


def _check_kind(cfg: ExperimentConfig, kind: str) -> None:
    if cfg.kind != kind:
        raise ValueError(f"config kind {cfg.kind!r} does not match {kind}")


def _finish(report: Report, cfg: ExperimentConfig) -> Report:
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        report.to_csv(out / f"{cfg.kind}_report.csv")
        (out / f"{cfg.kind}_report.json").write_text(report.to_json(), encoding="utf-8")
    return report


# ----------------------------------------------------------------------------
# sim1: does data drawn from the model carry the PLS structure?


def _sim1_noise(label: str, opt: dict, p: int, q: int, rng) -> NoiseSpec:
    ortho = bool(opt["orthogonal_scores"])
    if label == "iw":
        sc = float(opt["iw_scale"])
        Sx = sample_inverse_wishart(sc * np.eye(p), p + 1, rng)
        Sy = sample_inverse_wishart(sc * np.eye(q), q + 1, rng)
        return NoiseSpec("C", Sigma_X=Sx, Sigma_Y=Sy, sigma1_sq=sc, orthogonal_scores=ortho)
    if label == "exp":
        s = float(opt["exp_noise"])
        return NoiseSpec("B", s, s, sigma1_sq=s, latent_dist="exponential", orthogonal_scores=ortho)
    s = float(label)
    return NoiseSpec("B", s, s, sigma1_sq=s, orthogonal_scores=ortho)


def run_sim1(cfg: ExperimentConfig) -> Report:
    """Loading recovery of a PLS fit on data simulated from random parameters.

    Metric d_u{h} is the sign-invariant root distance (1/p)|u_hat - w|.
    """
    _check_kind(cfg, "sim1")
    opt = cfg.options
    p, q, H = int(opt["p"]), int(opt["q"]), int(cfg.H)
    report = Report("sim1", cfg.seed, cfg.reps)
    for ci, label in enumerate(opt["noise"]):
        for n in cfg.n_grid:
            def rep(r, label=label, ci=ci, n=n):
                rng = _rng(cfg, ci, n, r)
                P = random_params(p, q, H, rng, s_range=tuple(opt["s_range"]),
                                  b_range=tuple(opt["b_range"]), min_ratio=float(opt["min_ratio"]))
                data, _ = simulate_pls(P, n, _sim1_noise(str(label), opt, p, q, rng), rng)
                fit = fit_pls(data, FitConfig(H))
                return [loading_distance(fit.U_hat[:, h], P.W[:, h]) for h in range(H)]

            d = np.array(_pmap(rep, range(cfg.reps), cfg.workers))
            for h in range(H):
                report.add("sim1", n, label, f"d_u{h + 1}", d[:, h])
    return _finish(report, cfg)


# ----------------------------------------------------------------------------
# sim2: convergence of weights and scores as n grows


def run_sim2(cfg: ExperimentConfig) -> Report:
    """Mean-square weight and score distances for independent latents.

    d_u{h} = (1/p) |u_hat_h - w_h|^2 and d_xi{h} = (1/n) |xi_hat_h - xi_h|^2,
    with the sign of each fitted component aligned to the truth.
    """
    _check_kind(cfg, "sim2")
    opt = cfg.options
    p, q, H = int(opt["p"]), int(opt["q"]), int(cfg.H)
    s2 = np.asarray(opt["sigma_xi_sq"], dtype=float)[:H]
    B = np.asarray(opt["B"], dtype=float)[:H]
    report = Report("sim2", cfg.seed, cfg.reps)
    for ci, sig in enumerate(opt["noise"]):
        sig = float(sig)
        for n in cfg.n_grid:
            def rep(r, ci=ci, n=n, sig=sig):
                rng = _rng(cfg, ci, n, r)
                P = ModelParams(random_orthonormal(p, H, rng), random_orthonormal(q, H, rng), B, s2)
                data, gt = simulate_pls(P, n, NoiseSpec("B", sig, sig, sigma1_sq=sig), rng)
                fit = align_signs(fit_pls(data, FitConfig(H)), P.W, P.V)
                du = [loading_distance(fit.U_hat[:, h], P.W[:, h], "mean_sq") for h in range(H)]
                dxi = np.mean((fit.xi_hat - gt.xi) ** 2, axis=0)
                return np.concatenate([du, dxi])

            d = np.array(_pmap(rep, range(cfg.reps), cfg.workers))
            for h in range(H):
                report.add("sim2", n, sig, f"d_u{h + 1}", d[:, h])
                report.add("sim2", n, sig, f"d_xi{h + 1}", d[:, H + h])
    return _finish(report, cfg)


# ----------------------------------------------------------------------------
# sim3: corrected estimators on smooth loadings


def run_sim3(cfg: ExperimentConfig) -> Report:
    """Corrected noise, latent-variance and slope estimates.

    Cells are case B for every (alpha, n) and case C (inverse Wishart noise)
    for the n in ``case_c_n``. Fitted signs are aligned to the truth before
    summarizing, since b_h changes sign with v_h.
    """
    _check_kind(cfg, "sim3")
    opt = cfg.options
    P = sim3_params()
    H = P.H
    W, V = P.W, P.V
    report = Report("sim3", cfg.seed, cfg.reps)
    cells = []
    for case in opt["cases"]:
        ns = cfg.n_grid if case == "B" else [n for n in opt["case_c_n"]]
        cells += [(case, float(a), int(n)) for a in opt["alpha"] for n in ns]
    for ci, (case, alpha, n) in enumerate(cells):
        def rep(r, case=case, alpha=alpha, n=n, ci=ci):
            rng = _rng(cfg, ci, n, r)
            noise = noise_rate_spec(W, V, SIM3_B, SIM3_SXI, alpha, case, seed=rng,
                                    iw_alpha=float(opt["iw_alpha"]))
            data, _ = simulate_pls(P, n, noise, rng)
            fit = align_signs(fit_pls(data, FitConfig(H)), W, V)
            ce = corrected_estimates(fit, case)
            sx = float(np.mean(np.diag(np.atleast_2d(ce.sigma_x_sq_corr))))
            sy = float(np.mean(np.diag(np.atleast_2d(ce.sigma_y_sq_corr))))
            return np.concatenate([[loading_distance(fit.U_hat[:, h], W[:, h]) for h in range(H)],
                                   ce.sigma_xi_sq_corr, ce.b_corr, fit.b_hat,
                                   [sx, sy, ce.sigma1_sq_corr]])

        d = np.array(_pmap(rep, range(cfg.reps), cfg.workers))
        cid = f"sim3_{case}"
        noise = f"alpha={alpha}"
        names = ([f"d_u{h + 1}" for h in range(H)] + [f"s2_{h + 1}" for h in range(H)]
                 + [f"b_corr{h + 1}" for h in range(H)] + [f"b_hat{h + 1}" for h in range(H)]
                 + ["sigma_x_sq", "sigma_y_sq", "sigma1_sq"])
        for j, name in enumerate(names):
            report.add(cid, n, noise, name, d[:, j])
    return _finish(report, cfg)


# ----------------------------------------------------------------------------
# sim4: bootstrap coverage


def _coverage(lo, up, truth) -> float:
    return float(np.mean((lo <= truth) & (truth <= up)))


def sim4_once(cfg: ExperimentConfig, orthogonal_scores: bool, stream: int = 0) -> dict:
    """One bootstrap coverage run; returns coverage figures and the bands."""
    opt = cfg.options
    P = sim3_params()
    n = int(cfg.n_grid[0])
    rng = _rng(cfg, stream, n, 0)
    noise = replace(noise_rate_spec(P.W, P.V, SIM3_B, SIM3_SXI, float(opt["alpha"]), "B"),
                    orthogonal_scores=orthogonal_scores)
    data, _ = simulate_pls(P, n, noise, rng)
    X_test, Y_test, _ = draw_pls_rows(P, int(opt["n_test"]), noise, rng)
    fit = fit_pls(data, FitConfig(P.H))
    boot_seed = int(rng.integers(2**32))
    boot = residual_bootstrap(fit, int(cfg.B), seed=boot_seed, workers=cfg.workers)
    level = float(opt["level"])
    tab = intervals(boot, level)
    lo, _, up = predict_interval(boot, X_test, level)
    mlo, _, mup = mean_interval(boot, X_test, level)
    cu = _coverage(tab.lower["U"][:, 0], tab.upper["U"][:, 0], P.W[:, 0])
    cv = _coverage(tab.lower["V"][:, 0], tab.upper["V"][:, 0], P.V[:, 0])
    return {"ci_U1": cu, "ci_V1": cv,
            "ci_pooled": _coverage(np.r_[tab.lower["U"][:, 0], tab.lower["V"][:, 0]],
                                   np.r_[tab.upper["U"][:, 0], tab.upper["V"][:, 0]],
                                   np.r_[P.W[:, 0], P.V[:, 0]]),
            "pi": _coverage(lo, up, Y_test),
            "pi_wider": float(np.mean((up - lo) >= (mup - mlo))),
            "failures": len(boot.failures), "table": tab, "pi_band": (lo, up)}


def run_sim4(cfg: ExperimentConfig) -> Report:
    """Coverage of bootstrap confidence and prediction intervals.

    The main run uses orthogonal latent scores; with ``diagnostic`` a second
    run with independently drawn latents is reported as config sim4_indep.
    """
    _check_kind(cfg, "sim4")
    opt = cfg.options
    report = Report("sim4", cfg.seed, cfg.reps)
    n = int(cfg.n_grid[0])
    runs = [("sim4", bool(opt["orthogonal_scores"]), 0)]
    if opt.get("diagnostic"):
        runs.append(("sim4_indep", False, 1))
    for cid, ortho, stream in runs:
        for r in range(cfg.reps):
            res = sim4_once(cfg, ortho, stream + 2 * r)
            noise = f"alpha={opt['alpha']}"
            for key in ("ci_U1", "ci_V1", "ci_pooled", "pi", "pi_wider", "failures"):
                report.add(cid, n, noise, key, [res[key]])
            if r == 0:
                report.extra[cid] = {"intervals": [list(row) for row in res["table"].rows()
                                                   if row[0] in ("U", "V")],
                                     "pi_lower": res["pi_band"][0].tolist(),
                                     "pi_upper": res["pi_band"][1].tolist()}
    return _finish(report, cfg)


# ----------------------------------------------------------------------------
# NIR corn calibration


CORN_SHAPE = ((80, 700), (80, 4))


def load_corn(x_path, y_path) -> Dataset:
    """Spectra (80 x 700) and responses (80 x 4) as a centered dataset."""
    if not x_path or not y_path:
        raise FileNotFoundError("corn data requires x_path (80x700 spectra) and y_path (80x4 responses)")
    for path in (x_path, y_path):
        if not Path(path).exists():
            raise FileNotFoundError(f"{path} not found; expected CSV with a header row, "
                                    "80x700 spectra and 80x4 responses")
    _, X = read_table(x_path)
    _, Y = read_table(y_path)
    if X.shape != CORN_SHAPE[0] or Y.shape != CORN_SHAPE[1]:
        raise ValueError(f"expected spectra {CORN_SHAPE[0]} and responses {CORN_SHAPE[1]}, "
                         f"got {X.shape} and {Y.shape}")
    return Dataset.from_raw(X, Y)


def run_corn(cfg: ExperimentConfig) -> Report:
    """Fit PLS-R to the corn spectra and report errors and noise estimates.

    With ``out`` set, the first two weight vectors are written against
    wavelength; with B > 0 a bootstrap band for u_1 is added.
    """
    _check_kind(cfg, "corn")
    opt = cfg.options
    data = load_corn(opt["x_path"], opt["y_path"])
    fit = fit_pls(data, FitConfig(int(cfg.H)))
    ce = corrected_estimates(fit, "B")
    report = Report("corn", cfg.seed, 1)
    mse = np.mean((data.Y - fit.fitted_Y()) ** 2, axis=0)
    for j, m in enumerate(mse):
        report.add("corn", data.n, "B", f"mse_y{j + 1}", [m])
    report.add("corn", data.n, "B", "sigma_x_sq", [ce.sigma_x_sq_corr])
    report.add("corn", data.n, "B", "sigma_y_sq", [ce.sigma_y_sq_corr])
    report.add("corn", data.n, "B", "sigma1_sq", [ce.sigma1_sq_corr])
    for h in range(fit.H):
        report.add("corn", data.n, "B", f"s2_{h + 1}", [ce.sigma_xi_sq_corr[h]])
        report.add("corn", data.n, "B", f"b_corr{h + 1}", [ce.b_corr[h]])
    wl = float(opt["wavelength_start"]) + float(opt["wavelength_step"]) * np.arange(data.p)
    cols = [wl, fit.U_hat[:, 0], fit.U_hat[:, 1]]
    header = ["wavelength", "u1", "u2"]
    if cfg.B:
        boot = residual_bootstrap(fit, int(cfg.B), seed=cfg.seed, workers=cfg.workers)
        tab = intervals(boot, assumption=None)
        cols += [tab.lower["U"][:, 0], tab.upper["U"][:, 0]]
        header += ["u1_lower", "u1_upper"]
        inside = (tab.lower["U"][:, 0] <= fit.U_hat[:, 0]) & (fit.U_hat[:, 0] <= tab.upper["U"][:, 0])
        report.add("corn", data.n, "B", "u1_inside_band", [float(np.mean(inside))])
    report.extra["flags"] = list(ce.flags)
    if cfg.out:
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        write_table(Path(cfg.out) / "corn_weights.csv", header, np.column_stack(cols))
    return _finish(report, cfg)


RUNNERS = {"sim1": run_sim1, "sim2": run_sim2, "sim3": run_sim3, "sim4": run_sim4, "corn": run_corn}


def run(cfg: ExperimentConfig) -> Report:
    if cfg.kind not in RUNNERS:
        raise ValueError(f"{cfg.kind!r} is not an experiment")
    return RUNNERS[cfg.kind](cfg)


__all__ = ["ExperimentConfig", "Report", "run", "run_sim1", "run_sim2", "run_sim3", "run_sim4",
           "run_corn", "load_corn", "sim4_once"]
