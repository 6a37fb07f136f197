"""Result files: sweep CSV/JSON, per-label .dat plot data, placement files. All writes are atomic."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import re
import tempfile
from pathlib import Path

import numpy as np

from .experiments import SweepResult, SweepRow
from .placement import PlacementResult

CSV_HEADER = ("label", "N", "sqrt_crb_r_m", "sqrt_crb_theta_deg", "divergent_fraction")
SIG_DIGITS = 12


def fmt(x: float) -> str:
    """12 significant digits; infinities as the literal ``inf``."""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.{SIG_DIGITS}g}"


def atomic_write(path: str | Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise
    return path


def sweep_csv_text(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for row in result.rows:
        w.writerow([row.label, row.n, fmt(row.mean_sqrt_crb_r), fmt(row.mean_sqrt_crb_theta_deg),
                    fmt(row.divergent_fraction)])
    return buf.getvalue()


def sweep_json_text(result: SweepResult) -> str:
    rows = [{"label": r.label, "N": r.n, "sqrt_crb_r_m": fmt(r.mean_sqrt_crb_r),
             "sqrt_crb_theta_deg": fmt(r.mean_sqrt_crb_theta_deg),
             "divergent_fraction": fmt(r.divergent_fraction)} for r in result.rows]
    return json.dumps({"rows": rows}, indent=1) + "\n"


def parse_sweep_csv(text: str) -> SweepResult:
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    rows = [SweepRow(label, int(n), float(r), float(t), float(d)) for label, n, r, t, d in reader]
    return SweepResult(tuple(rows))


def read_sweep_csv(path: str | Path) -> SweepResult:
    return parse_sweep_csv(Path(path).read_text(encoding="utf-8"))


def label_slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_").lower() or "tx"


def dat_text(result: SweepResult, label: str, metric: str) -> str:
    attr = {"range": "mean_sqrt_crb_r", "angle": "mean_sqrt_crb_theta_deg"}[metric]
    return "".join(f"{row.n} {fmt(getattr(row, attr))}\n" for row in result.for_label(label))


def write_sweep(result: SweepResult, path: str | Path, fmt_name: str = "csv") -> list[Path]:
    """Main table at ``path`` plus ``<stem>_<label>_{range,angle}.dat`` next to it."""
    path = Path(path)
    text = sweep_csv_text(result) if fmt_name == "csv" else sweep_json_text(result)
    written = [atomic_write(path, text)]
    for label in result.labels():
        for metric in ("range", "angle"):
            dat = path.with_name(f"{path.stem}_{label_slug(label)}_{metric}.dat")
            written.append(atomic_write(dat, dat_text(result, label, metric)))
    return written


def read_dat(path: str | Path) -> list[tuple[int, float]]:
    out = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.strip():
            n, v = line.split()
            out.append((int(n), float(v)))
    return out


def placement_text(result: PlacementResult, metadata: dict) -> str:
    meta = dict(metadata)
    meta.update(objective_value=result.objective_value, restarts=result.restarts_used,
                iterations=result.iterations, seed=result.seed)
    lines = ["# pinchcrb placement: one PA position (m) per line",
             "# " + json.dumps(meta, sort_keys=True)]
    lines += [fmt(float(y)) for y in result.positions]
    return "\n".join(lines) + "\n"


def read_placement(path: str | Path) -> tuple[np.ndarray, dict]:
    positions, meta = [], {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        s = line.strip()
        if not s:
            continue
        if s.startswith("#"):
            body = s[1:].strip()
            if body.startswith("{"):
                meta = json.loads(body)
            continue
        positions.append(float(s))
    return np.array(positions), meta
