"""On-disk formats: paired-sample CSV files and serialized models.

Dataset CSV
-----------
Line 1 is a comment ``# kmedepth-data version=1 config_hash=<h>
predictor=<kind> response=<kind>``.  Purely Euclidean data then has the
header ``x_1..x_p,y_1..y_m`` (plus ``w`` for survey weights).  When either
side is a curve or quantile function the header is ``id,x_...,y_...[,w]``
and is followed by a ``#grid`` row holding the grid value of every curve
column (blank for Euclidean columns).  Numbers are written with Python's
shortest round-trip ``repr``.

Model JSON
----------
A single JSON document whose first keys are ``version`` and
``config_hash``.  Floats use the same round-trip decimal encoding, so a
reloaded model refactorizes to bit-identical results.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .conddist import BetaGamlssModel, KnnCdfModel
from .conformal import PredictionModel
from .embedding import fit_ckme
from .errors import DataError
from .kernel import KINDS, KernelSpec, ResponseSample
from .simulate import PairedSample

FORMAT_VERSION = 1
DATA_TAG = "kmedepth-data"
MODEL_TAG = "kmedepth-model"
FLOAT_ENCODING = "decimal-shortest-roundtrip-binary64"


def _num(v: float) -> str:
    return repr(float(v))


def _parse_comment(line: str) -> dict:
    fields = {}
    for tok in line.lstrip("#").split()[1:]:
        if "=" in tok:
            k, v = tok.split("=", 1)
            fields[k] = v
    return fields


def write_dataset(path, data: PairedSample, config_hash: str = "none") -> None:
    X, Y = data.X, data.Y
    plain = X.kind == "euclidean" and Y.kind == "euclidean"
    xcols = [f"x_{j + 1}" for j in range(X.dim)]
    ycols = [f"y_{j + 1}" for j in range(Y.dim)]
    wcol = [] if data.weights is None else ["w"]
    with open(path, "w", newline="") as fh:
        fh.write(f"# {DATA_TAG} version={FORMAT_VERSION} config_hash={config_hash} "
                 f"predictor={X.kind} response={Y.kind}\n")
        out = csv.writer(fh, lineterminator="\n")
        if plain:
            out.writerow(xcols + ycols + wcol)
        else:
            out.writerow(["id"] + xcols + ycols + wcol)
            xg = [""] * X.dim if X.grid is None else [_num(v) for v in X.grid]
            yg = [""] * Y.dim if Y.grid is None else [_num(v) for v in Y.grid]
            out.writerow(["#grid"] + xg + yg + [""] * len(wcol))
        for i in range(len(data)):
            row = [_num(v) for v in X.values[i]] + [_num(v) for v in Y.values[i]]
            if wcol:
                row.append(_num(data.weights[i]))
            out.writerow(row if plain else [str(i)] + row)


def read_dataset(path, predictor: str | None = None, response: str | None = None) -> PairedSample:
    """Read a dataset CSV; ``predictor``/``response`` override the kinds in the file."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    meta = {}
    if lines and lines[0].startswith("#") and DATA_TAG in lines[0]:
        meta = _parse_comment(lines[0])
        if meta.get("version") != str(FORMAT_VERSION):
            raise DataError(f"{path}: unsupported data version {meta.get('version')}")
        lines = lines[1:]
    rows = list(csv.reader(lines))
    if not rows:
        raise DataError(f"{path}: no header")
    header, body = rows[0], rows[1:]
    grid_row = None
    if body and body[0] and body[0][0] == "#grid":
        grid_row, body = body[0], body[1:]
    body = [r for r in body if r and not r[0].startswith("#")]
    try:
        table = np.array(body, dtype=float).reshape(len(body), len(header))
        grid_vals = None if grid_row is None else grid_row
    except ValueError as exc:
        raise DataError(f"{path}: malformed numeric table ({exc})") from exc
    if len(table) == 0:
        raise DataError(f"{path}: no data rows")
    xi = [j for j, h in enumerate(header) if h.startswith("x_")]
    yi = [j for j, h in enumerate(header) if h.startswith("y_")]
    if not xi or not yi:
        raise DataError(f"{path}: need x_* and y_* columns")
    pk = predictor or meta.get("predictor", "euclidean")
    rk = response or meta.get("response", "euclidean")
    for kind in (pk, rk):
        if kind not in KINDS:
            raise DataError(f"{path}: unknown response kind {kind!r}")

    def grid_for(cols, kind):
        if kind == "euclidean":
            return None
        if grid_vals is None:
            raise DataError(f"{path}: {kind} columns need a #grid row")
        return np.array([float(grid_vals[j]) for j in cols])

    X = ResponseSample(pk, table[:, xi], grid_for(xi, pk))
    Y = ResponseSample(rk, table[:, yi], grid_for(yi, rk))
    w = table[:, header.index("w")] if "w" in header else None
    return PairedSample(X, Y, w)


# --- models -------------------------------------------------------------------

def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float).ravel()]


def _sample_doc(s: ResponseSample) -> dict:
    return {"kind": s.kind, "grid": None if s.grid is None else _floats(s.grid),
            "values": [_floats(row) for row in s.values]}


def _sample_from(doc) -> ResponseSample:
    grid = None if doc["grid"] is None else np.array(doc["grid"], dtype=float)
    return ResponseSample(doc["kind"], np.array(doc["values"], dtype=float), grid)


def _cdf_doc(g):
    if g is None:
        return None
    if isinstance(g, KnnCdfModel):
        return {"type": "knn", "k": g.k, "metric": g.metric, "X": _sample_doc(g.X),
                "scores": _floats(g.scores)}
    return {"type": "beta", "coef_mean": _floats(g.coef_mean),
            "coef_precision": _floats(g.coef_precision), "clamp": g.clamp,
            "converged": g.converged, "loglik": g.loglik, "n_iter": g.n_iter,
            "rank_deficient": g.rank_deficient}


def _cdf_from(doc):
    if doc is None:
        return None
    if doc["type"] == "knn":
        scores = np.array(doc["scores"], dtype=float)
        scores.setflags(write=False)
        return KnnCdfModel(_sample_from(doc["X"]), scores, int(doc["k"]), doc["metric"])
    return BetaGamlssModel(np.array(doc["coef_mean"]), np.array(doc["coef_precision"]),
                           doc["clamp"], doc["converged"], doc["loglik"], doc["n_iter"],
                           doc["rank_deficient"])


def model_to_dict(model: PredictionModel, config_hash: str = "none") -> dict:
    c = model.ckme
    return {
        "version": FORMAT_VERSION,
        "config_hash": config_hash,
        "format": MODEL_TAG,
        "float_encoding": FLOAT_ENCODING,
        "mode": model.mode,
        "settings": model.settings,
        "ckme": {
            "lam": c.lam,
            "k_x": {"metric": c.k_x.metric, "gamma": c.k_x.gamma},
            "k_y": {"metric": c.k_y.metric, "gamma": c.k_y.gamma},
            "weights": _floats(c.weights),
            "X": _sample_doc(c.X),
            "Y": _sample_doc(c.Y),
        },
        "cdf_model": _cdf_doc(model.cdf_model),
        "cal_scores": _floats(model.cal_scores),
    }


def model_from_dict(doc: dict) -> PredictionModel:
    if doc.get("format") != MODEL_TAG:
        raise DataError("not a kmedepth model document")
    if doc.get("version") != FORMAT_VERSION:
        raise DataError(f"model version {doc.get('version')} is not {FORMAT_VERSION}")
    c = doc["ckme"]
    w = np.array(c["weights"], dtype=float)
    ckme = fit_ckme(_sample_from(c["X"]), _sample_from(c["Y"]),
                    KernelSpec(**c["k_x"]), KernelSpec(**c["k_y"]), c["lam"],
                    None if np.all(w == 1.0) else w)
    return PredictionModel(doc["mode"], ckme, np.array(doc["cal_scores"], dtype=float),
                           _cdf_from(doc["cdf_model"]), doc["settings"])


def save_model(path, model: PredictionModel, config_hash: str = "none") -> None:
    Path(path).write_text(json.dumps(model_to_dict(model, config_hash), allow_nan=False) + "\n")


def load_model(path) -> PredictionModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot load model from {path}: {exc}") from exc
    return model_from_dict(doc)
