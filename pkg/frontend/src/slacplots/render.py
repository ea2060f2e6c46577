"""Render benchmark CSVs into figures.

The two producers write fixed schemas:

* channel-estimation benchmark: ``estimator,t_p,snr_db,nmse,eff_se_bits``
* pilot-budget tradeoff sweep: ``ris_elems,policy,t_p,peb_m,eff_se_bits``

Three figure kinds are supported.  ``cebench_se`` plots effective spectral
efficiency against SNR, one line per (estimator, pilot budget).
``cebench_nmse`` plots NMSE against SNR on a log axis.  ``tradeoff`` plots
the position error bound (log axis) against effective SE, one curve per
(RIS size, policy), traversed in order of increasing pilot budget so that
T_p grows right-to-left along each curve.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "slacplots"

import matplotlib.pyplot as plt  # noqa: E402

CEBENCH_COLUMNS = ["estimator", "t_p", "snr_db", "nmse", "eff_se_bits"]
TRADEOFF_COLUMNS = ["ris_elems", "policy", "t_p", "peb_m", "eff_se_bits"]

KIND_COLUMNS = {
    "cebench_se": CEBENCH_COLUMNS,
    "cebench_nmse": CEBENCH_COLUMNS,
    "tradeoff": TRADEOFF_COLUMNS,
}


class SchemaMismatch(ValueError):
    """The CSV header does not provide a column the figure kind needs."""


@dataclass(frozen=True)
class FigureRequest:
    """One figure to render.

    Attributes:
        csv_path: Input CSV produced by the benchmark CLI.
        kind: One of ``cebench_se``, ``cebench_nmse``, ``tradeoff``.
        out_path: Output image path; the suffix selects the format
            (``.svg`` by default, ``.png`` also supported).
        axis_options: Optional overrides, e.g. ``{"log_y": False}``.
    """

    csv_path: Path
    kind: str
    out_path: Path
    axis_options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KIND_COLUMNS:
            raise ValueError(f"unknown figure kind {self.kind!r}; "
                             f"expected one of {sorted(KIND_COLUMNS)}")


def _load_rows(path: Path, required: list[str]) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in required:
            if col not in header:
                raise SchemaMismatch(f"CSV {path} is missing column {col!r}")
        rows = list(reader)
    if not rows:
        raise ValueError(f"CSV {path} contains no data rows")
    return rows


def _finite(points):
    return [(x, y) for x, y in points if math.isfinite(x) and math.isfinite(y)]


def _render_cebench(rows: list[dict], y_col: str, y_label: str,
                    log_y: bool, ax) -> None:
    series: dict[tuple, list] = {}
    for r in rows:
        key = (r["estimator"], int(r["t_p"]))
        series.setdefault(key, []).append((float(r["snr_db"]), float(r[y_col])))
    for (est, t_p), pts in sorted(series.items()):
        pts = _finite(sorted(pts))
        if not pts:
            continue
        label = est if t_p == 0 else f"{est} (T_p={t_p})"
        ax.plot(*zip(*pts), marker="o", label=label)
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel(y_label)
    if log_y:
        ax.set_yscale("log")


def _render_tradeoff(rows: list[dict], log_y: bool, ax) -> None:
    series: dict[tuple, list] = {}
    for r in rows:
        key = (int(r["ris_elems"]), r["policy"])
        series.setdefault(key, []).append(
            (int(r["t_p"]), float(r["eff_se_bits"]), float(r["peb_m"])))
    for (n, policy), pts in sorted(series.items()):
        pts.sort()  # traverse in T_p order: T_p increases right-to-left
        finite = [(se, peb) for _, se, peb in pts
                  if math.isfinite(se) and math.isfinite(peb)]
        if not finite:
            continue
        ax.plot(*zip(*finite), marker="o",
                label=f"{policy}, {n} elements")
    ax.set_xlabel("Effective SE (bits/s/Hz)")
    ax.set_ylabel("PEB (m)")
    if log_y:
        ax.set_yscale("log")


def render(request: FigureRequest) -> None:
    """Render one figure to ``request.out_path``.

    Raises:
        SchemaMismatch: If the CSV header lacks a required column.
        ValueError: If the kind is unknown or the CSV has no data rows.
        OSError: If the CSV cannot be read or the image cannot be written.
    """
    rows = _load_rows(Path(request.csv_path), KIND_COLUMNS[request.kind])
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    try:
        if request.kind == "cebench_se":
            _render_cebench(rows, "eff_se_bits", "Effective SE (bits/s/Hz)",
                            request.axis_options.get("log_y", False), ax)
        elif request.kind == "cebench_nmse":
            _render_cebench(rows, "nmse", "NMSE",
                            request.axis_options.get("log_y", True), ax)
        else:
            _render_tradeoff(rows, request.axis_options.get("log_y", True), ax)
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        fig.tight_layout()
        # strip volatile metadata so repeated runs are byte-identical
        out = Path(request.out_path)
        if out.suffix.lower() == ".svg":
            fig.savefig(out, format="svg", metadata={"Date": None})
        else:
            fig.savefig(out)
    finally:
        plt.close(fig)
