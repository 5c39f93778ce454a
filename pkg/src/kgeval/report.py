"""Comparison tables across tie-breaking protocols, styled after the usual
Reported | Random | Top | Bottom layout with deltas against Random.

Rendering is a pure function of the evaluation report JSON; byte-level
golden tests pin the output.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

SENSITIVITY_TAU = 0.01

_METRIC_KEYS = ("mrr", "mr", "h10")


@dataclass(frozen=True)
class ProtocolCell:
    mrr: float
    mr: float
    h10: float


@dataclass(frozen=True)
class ComparisonRow:
    name: str
    random_mean: ProtocolCell
    random_std: ProtocolCell
    top: ProtocolCell
    bottom: ProtocolCell
    reported: ProtocolCell | None = None

    def delta(self, cell: ProtocolCell, key: str) -> float:
        return getattr(cell, key) - getattr(self.random_mean, key)


def classify_sensitivity(row: ComparisonRow, tau: float = SENSITIVITY_TAU) -> str:
    """'affected' iff the TOP-vs-BOTTOM MRR gap strictly exceeds tau."""
    return "affected" if abs(row.top.mrr - row.bottom.mrr) > tau else "non-affected"


def _cell_from_metrics(metrics: dict) -> ProtocolCell:
    hits = metrics.get("hits", {})
    return ProtocolCell(
        mrr=float(metrics["mrr"]),
        mr=float(metrics["mr"]),
        h10=float(hits.get("10", hits.get(10, float("nan")))),
    )


def row_from_report(
    name: str, report: dict, reported: dict | None = None
) -> ComparisonRow:
    """Build a comparison row from an evaluation report's jsonable form.

    The report must contain all three protocols. 'reported' is user-supplied
    external metadata (numbers quoted from elsewhere), never recomputed.
    """
    metrics = report["metrics"]
    missing = [p for p in ("top", "bottom", "random") if p not in metrics]
    if missing:
        raise ValueError(f"report for {name!r} lacks protocols: {missing}")
    return ComparisonRow(
        name=name,
        random_mean=_cell_from_metrics(metrics["random"]["mean"]),
        random_std=_cell_from_metrics(metrics["random"]["std"]),
        top=_cell_from_metrics(metrics["top"]),
        bottom=_cell_from_metrics(metrics["bottom"]),
        reported=_cell_from_metrics(reported) if reported else None,
    )


def _frac3(v: float) -> str:
    # paper-style fractions: drop the leading zero (.243), keep 1.000
    s = f"{v:.3f}"
    return s[1:] if s.startswith("0.") else s


def _frac_delta(d: float) -> str:
    return f"{d:+.3f}".replace("+0.", "+.").replace("-0.", "-.")


def _std4(v: float) -> str:
    s = f"{v:.4f}"
    return s[1:] if s.startswith("0.") else s


def _mr(v: float) -> str:
    return f"{v:.0f}"


def _mr_delta(d: float) -> str:
    return f"{d:+.0f}"


def _random_cells(row: ComparisonRow) -> list[str]:
    return [
        f"{_frac3(row.random_mean.mrr)} ± {_std4(row.random_std.mrr)}",
        f"{_mr(row.random_mean.mr)} ± {_mr(row.random_std.mr)}",
        f"{_frac3(row.random_mean.h10)} ± {_std4(row.random_std.h10)}",
    ]


def _protocol_cells(row: ComparisonRow, cell: ProtocolCell) -> list[str]:
    return [
        f"{_frac3(cell.mrr)} ({_frac_delta(row.delta(cell, 'mrr'))})",
        f"{_mr(cell.mr)} ({_mr_delta(row.delta(cell, 'mr'))})",
        f"{_frac3(cell.h10)} ({_frac_delta(row.delta(cell, 'h10'))})",
    ]


def _reported_cells(row: ComparisonRow) -> list[str]:
    if row.reported is None:
        return ["-", "-", "-"]
    return [_frac3(row.reported.mrr), _mr(row.reported.mr), _frac3(row.reported.h10)]


_HEADER = [
    "Model",
    "Reported MRR ↑",
    "Reported MR ↓",
    "Reported H@10 ↑",
    "Random MRR ↑",
    "Random MR ↓",
    "Random H@10 ↑",
    "Top MRR ↑",
    "Top MR ↓",
    "Top H@10 ↑",
    "Bottom MRR ↑",
    "Bottom MR ↓",
    "Bottom H@10 ↑",
    "Sensitivity",
]


def _row_cells(row: ComparisonRow, tau: float) -> list[str]:
    return [
        row.name,
        *_reported_cells(row),
        *_random_cells(row),
        *_protocol_cells(row, row.top),
        *_protocol_cells(row, row.bottom),
        classify_sensitivity(row, tau),
    ]


def render_markdown(rows: list[ComparisonRow], tau: float = SENSITIVITY_TAU) -> str:
    lines = [
        "| " + " | ".join(_HEADER) + " |",
        "|" + "---|" * len(_HEADER),
    ]
    for row in rows:
        lines.append("| " + " | ".join(_row_cells(row, tau)) + " |")
    return "\n".join(lines) + "\n"


_CSV_HEADER = [
    "model",
    "reported_mrr", "reported_mr", "reported_h10",
    "random_mrr", "random_mrr_std", "random_mr", "random_mr_std",
    "random_h10", "random_h10_std",
    "top_mrr", "top_mrr_delta", "top_mr", "top_mr_delta", "top_h10", "top_h10_delta",
    "bottom_mrr", "bottom_mrr_delta", "bottom_mr", "bottom_mr_delta",
    "bottom_h10", "bottom_h10_delta",
    "sensitivity",
]


def _row_jsonable(row: ComparisonRow, tau: float) -> dict:
    def cell(c: ProtocolCell) -> dict:
        return {"mrr": c.mrr, "mr": c.mr, "h10": c.h10}

    out: dict = {
        "model": row.name,
        "reported": cell(row.reported) if row.reported else None,
        "random": {"mean": cell(row.random_mean), "std": cell(row.random_std)},
        "top": cell(row.top),
        "bottom": cell(row.bottom),
        "deltas": {
            proto: {key: row.delta(c, key) for key in _METRIC_KEYS}
            for proto, c in (("top", row.top), ("bottom", row.bottom))
        },
        "sensitivity": classify_sensitivity(row, tau),
    }
    return out


def render_csv(rows: list[ComparisonRow], tau: float = SENSITIVITY_TAU) -> str:
    lines = [",".join(_CSV_HEADER)]
    for row in rows:
        rep = row.reported
        values = [
            row.name,
            "" if rep is None else repr(rep.mrr),
            "" if rep is None else repr(rep.mr),
            "" if rep is None else repr(rep.h10),
            repr(row.random_mean.mrr), repr(row.random_std.mrr),
            repr(row.random_mean.mr), repr(row.random_std.mr),
            repr(row.random_mean.h10), repr(row.random_std.h10),
            repr(row.top.mrr), repr(row.delta(row.top, "mrr")),
            repr(row.top.mr), repr(row.delta(row.top, "mr")),
            repr(row.top.h10), repr(row.delta(row.top, "h10")),
            repr(row.bottom.mrr), repr(row.delta(row.bottom, "mrr")),
            repr(row.bottom.mr), repr(row.delta(row.bottom, "mr")),
            repr(row.bottom.h10), repr(row.delta(row.bottom, "h10")),
            classify_sensitivity(row, tau),
        ]
        lines.append(",".join(values))
    return "\n".join(lines) + "\n"


def render_json(rows: list[ComparisonRow], tau: float = SENSITIVITY_TAU) -> str:
    return json.dumps([_row_jsonable(r, tau) for r in rows], sort_keys=True, indent=2) + "\n"


def render_report(rows: list[ComparisonRow], fmt: str, tau: float = SENSITIVITY_TAU) -> str:
    if fmt == "markdown":
        return render_markdown(rows, tau)
    if fmt == "csv":
        return render_csv(rows, tau)
    if fmt == "json":
        return render_json(rows, tau)
    raise ValueError(f"unknown report format {fmt!r}")
