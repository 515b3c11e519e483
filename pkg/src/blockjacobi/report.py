"""Deterministic CSV and JSON emitters.

Complex numbers become ``[re, im]`` in JSON, non-finite floats become null,
keys are sorted and floats use repr, so identical inputs give identical bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, is_dataclass

import numpy as np

from . import __version__


def to_jsonable(obj):
    """Recursively convert numpy and complex values to plain JSON types."""
    if is_dataclass(obj) and not isinstance(obj, type):
        return to_jsonable(asdict(obj))
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [to_jsonable(float(obj.real)), to_jsonable(float(obj.imag))]
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def provenance(model, seed: int | None, **horizons) -> dict:
    """Metadata embedded in every report."""
    return {"version": __version__, "model": model.name, "spec_hash": model.spec_hash(),
            "seed": None if seed is None else f"{seed:#x}", "horizons": horizons}


def fmt(x) -> str:
    """CSV cell for a number; non-finite values are left empty."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if math.isfinite(x) else ""
    return str(x)


def csv_text(header: list[str], rows, meta: dict | None = None) -> str:
    """CSV with optional ``# key=value`` comment lines carrying provenance."""
    buf = io.StringIO()
    if meta:
        for k in sorted(meta):
            buf.write(f"# {k}={json.dumps(to_jsonable(meta[k]), sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def density_rows(est) -> tuple[list[str], list[list]]:
    """Flatten a DensityEstimate to one CSV row per (lambda, i, j)."""
    d = est.D.shape[1]
    header = ["lambda", "i", "j", "entry_ij_re", "entry_ij_im", "fit_residual",
              "singular_suspect", "rank"]
    rows = []
    for k, lam in enumerate(est.lambda_grid):
        for i in range(d):
            for j in range(d):
                x = est.D[k, i, j]
                rows.append([lam, i, j, x.real, x.imag, est.fit_residual[k],
                             est.singular_suspect[k], est.rank[k]])
    return header, rows


def profile_rows(profile) -> tuple[list[str], list[list]]:
    header = ["lambda", "t", "value"]
    rows = [[lam, t, profile.values[i, j]]
            for i, lam in enumerate(profile.lambda_grid)
            for j, t in enumerate(profile.t_grid)]
    return header, rows
