"""Time-series rows, CSV/JSON emission and run summaries.

CSV: header in :func:`series_header` order, values formatted with ``%.12g``,
LF line endings. JSON: a list of objects with the same keys; non-finite
numbers are written as the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
All files are written atomically (temporary file, then rename).
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import tempfile

import numpy as np

from .generator import TauPolicy
from .operators import entropy

FLOAT_FMT = "%.12g"


def series_header(n: int) -> list[str]:
    return (
        ["t"]
        + [f"p_{i + 1}" for i in range(n)]
        + ["entropy", "entropy_rate", "theta", "tau", "tau_U", "tau_D", "tau_K", "tau_S", "tau_UD"]
        + [f"tau_Pe{i + 1}" for i in range(n)]
        + ["r_SM", "min_residual", "residual_name"]
    )


def series_rows(record, policy: TauPolicy, time_unit: float = 1.0) -> list[dict]:
    """One row per sample; ``t`` is divided by ``time_unit`` (tau for constant tau)."""
    rows = []
    for s in record.samples:
        rep = s.report
        n = s.state.dim
        p = np.diagonal(s.state.rho).real
        row = {"t": s.t / time_unit}
        for i in range(n):
            row[f"p_{i + 1}"] = float(p[i])
        tm = rep.times
        name, val = rep.min_residual()
        row.update(
            entropy=entropy(s.state),
            entropy_rate=float(rep.entropy_rate),
            theta=float(s.sea.theta),
            tau=float(s.sea.tau),
            tau_U=tm.tau_U,
            tau_D=tm.tau_D,
            tau_K=tm.tau_K,
            tau_S=tm.tau_S,
            tau_UD=tm.tau_UD,
        )
        for i in range(n):
            row[f"tau_Pe{i + 1}"] = float(tm.tau_F.get(f"P_e{i + 1}", math.nan))
        row.update(r_SM=float(rep.correlations.get("r_SM", math.nan)), min_residual=float(val), residual_name=name)
        rows.append(row)
    return rows


def _fmt(v):
    if isinstance(v, str):
        return v
    return FLOAT_FMT % v


def _json_value(v):
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(FLOAT_FMT % v)


def to_jsonable(obj):
    """Recursively convert numpy values and non-finite floats for JSON."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _json_value(obj)
    return obj


def render_csv(rows: list[dict], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(row[k]) for k in header])
    return buf.getvalue()


def render_json(rows: list[dict], header: list[str]) -> str:
    data = [{k: _json_value(row[k]) for k in header} for row in rows]
    return json.dumps(data, indent=1) + "\n"


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_series(path: str) -> list[dict]:
    """Load a CSV or JSON series back into rows of floats (names kept as strings)."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    if path.endswith(".json"):
        rows = json.loads(text)
    else:
        rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        conv = {}
        for k, v in row.items():
            if k == "residual_name":
                conv[k] = v
            else:
                conv[k] = float(v)
        out.append(conv)
    return out


def residual_extremes(samples) -> tuple[dict, dict]:
    """Minimum residual and maximum identity deviation of every relation over samples.

    Relations that were never applicable stay ``nan``.
    """
    res: dict = {}
    ids: dict = {}
    for s in samples:
        for src, dst, pick in ((s.report.residuals, res, min), (s.report.identities, ids, max)):
            for k, v in src.items():
                cur = dst.get(k, math.nan)
                if math.isnan(v):
                    dst[k] = cur
                else:
                    dst[k] = v if math.isnan(cur) else pick(cur, v)
    return res, ids
