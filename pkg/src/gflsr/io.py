"""CSV and JSON persistence with shortest round-trip float formatting."""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, fields, is_dataclass
from pathlib import Path

import numpy as np

from .core import Dataset, FitResult
from .fit import FitConfig, GflsrFitConfig


def fmt(x) -> str:
    """Shortest decimal string that reads back to the same double."""
    return repr(float(x))


def read_table(path):
    """(header, float matrix) from a CSV file with a header row."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if all(_is_number(h) for h in header):
        raise ValueError(f"{path}: header required")
    data = np.empty((len(rows) - 1, len(header)))
    for i, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise ValueError(f"{path}: row {i} has {len(row)} cells, expected {len(header)}")
        for j, cell in enumerate(row):
            try:
                data[i - 2, j] = float(cell)
            except ValueError:
                raise ValueError(f"{path}: non-numeric cell {cell!r} at row {i}, column {j + 1}") from None
    return header, data


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def write_table(path, header, data) -> None:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in data:
            w.writerow([fmt(v) for v in row])


def load_csv(path, p=None, center: bool = True) -> Dataset:
    """Read a dataset; the first ``p`` columns are X and the rest Y.

    Without ``p`` the split uses header names (x... versus y...). With
    ``center=False`` the values are returned as stored, means set to zero.
    """
    header, M = read_table(path)
    if p is None:
        p = sum(1 for h in header if h.lower().startswith("x"))
        if p == 0 or p == len(header):
            raise ValueError("cannot split columns: pass p or name columns x1.. and y1..")
    if not 0 < p < M.shape[1]:
        raise ValueError(f"p={p} does not split {M.shape[1]} columns")
    X, Y = M[:, :p], M[:, p:]
    if center:
        return Dataset.from_raw(X, Y)
    if X.shape[0] < 2 or not np.all(np.isfinite(M)):
        raise ValueError("need n >= 2 finite rows")
    return Dataset(X, Y, np.zeros(X.shape[1]), np.zeros(Y.shape[1]))


def save_csv(obj, path) -> None:
    """Write a Dataset (raw values), an IntervalTable or a Report as CSV."""
    if isinstance(obj, Dataset):
        X, Y = obj.raw()
        header = [f"x{j + 1}" for j in range(X.shape[1])] + [f"y{j + 1}" for j in range(Y.shape[1])]
        write_table(path, header, np.hstack([X, Y]))
        return
    if hasattr(obj, "rows") and hasattr(obj, "lower"):
        with Path(path).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["parameter", "index", "lower", "point", "upper"])
            for name, idx, lo, pt, up in obj.rows():
                w.writerow([name, idx, fmt(lo), fmt(pt), fmt(up)])
        return
    if hasattr(obj, "to_csv"):
        obj.to_csv(path)
        return
    raise TypeError(f"cannot save {type(obj).__name__} as CSV")


def _jsonable(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if is_dataclass(x):
        return {f.name: _jsonable(getattr(x, f.name)) for f in fields(x)}
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=1)


_ARRAYS = ("U_hat", "V_hat", "xi_hat", "omega_hat", "b_hat", "theta_hat", "X_resid", "Y_resid",
           "eps_hat", "x_means", "y_means", "P_hat", "X0", "Y0", "f_coef")


def fit_to_dict(fit: FitResult) -> dict:
    d = {k: _jsonable(getattr(fit, k)) for k in _ARRAYS}
    d["variant"] = fit.variant
    d["f_degree"] = fit.f_degree
    cfg = fit.config
    d["config"] = {"type": type(cfg).__name__, **asdict(cfg)} if cfg is not None else None
    return d


def fit_from_dict(d: dict) -> FitResult:
    kw = {}
    for k in _ARRAYS:
        v = d.get(k)
        kw[k] = None if v is None else np.asarray(v, dtype=float)
    for k in ("xi_hat", "omega_hat", "X_resid", "Y_resid", "eps_hat", "X0", "Y0"):
        kw[k] = np.atleast_2d(kw[k]) if kw[k].size else kw[k].reshape(0, 0)
    cfg = d.get("config")
    if cfg is not None:
        cfg = dict(cfg)
        kind = cfg.pop("type")
        cfg = (FitConfig if kind == "FitConfig" else GflsrFitConfig)(**cfg)
    return FitResult(variant=d["variant"], config=cfg, f_degree=int(d.get("f_degree", 1)), **kw)


def save_fit(fit: FitResult, path) -> None:
    Path(path).write_text(json.dumps(fit_to_dict(fit)), encoding="utf-8")


def load_fit(path) -> FitResult:
    return fit_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
