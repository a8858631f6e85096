"""Report emission: CSV rows and aligned text tables.

Rows mirror the experiment matrix: one row per run, sorted by (task,
method, backend).  Explained variance is printed times 100 with one
decimal; the mean absolute error is already in percent probability.
"""

from __future__ import annotations

import io
from pathlib import Path

COLUMNS = [
    "task",
    "method",
    "backend",
    "bot_n",
    "demographics",
    "seed_set",
    "pearson_r",
    "spearman_rho",
    "mae",
    "r2_x100",
    "n_test",
]


def report_row(record) -> dict:
    """Flatten one RunRecord into a formatted report row."""
    config = record.config
    method = config["method"]
    if record.variant:
        method = f"{method}@{record.variant}"
    seeds = config["seeds"]
    seed_set = (
        f"{seeds[0]}-{seeds[-1]}"
        if list(seeds) == list(range(seeds[0], seeds[-1] + 1))
        else ",".join(str(s) for s in seeds)
    )
    report = record.report
    return {
        "task": config["task"],
        "method": method,
        "backend": record.backend_id,
        "bot_n": str(config["bot_n"]),
        "demographics": "yes" if config["include_demographics"] else "no",
        "seed_set": seed_set,
        "pearson_r": f"{report.pearson_r:.3f}",
        "spearman_rho": f"{report.spearman_rho:.3f}",
        "mae": f"{report.mae_percent:.1f}",
        "r2_x100": f"{report.r_squared * 100.0:.1f}",
        "n_test": str(report.n_test),
    }


def _sorted_rows(rows: list[dict]) -> list[dict]:
    return sorted(rows, key=lambda r: (r["task"], r["method"], r["backend"]))


def render_csv(rows: list[dict]) -> str:
    out = io.StringIO()
    out.write(",".join(COLUMNS) + "\n")
    for row in _sorted_rows(rows):
        out.write(",".join(row[c] for c in COLUMNS) + "\n")
    return out.getvalue()


def render_table(rows: list[dict]) -> str:
    rows = _sorted_rows(rows)
    widths = {
        c: max(len(c), *(len(r[c]) for r in rows)) if rows else len(c) for c in COLUMNS
    }
    lines = [
        "  ".join(c.ljust(widths[c]) for c in COLUMNS),
        "  ".join("-" * widths[c] for c in COLUMNS),
    ]
    lines.extend(
        "  ".join(row[c].ljust(widths[c]) for c in COLUMNS) for row in rows
    )
    return "\n".join(lines) + "\n"


def emit_report(records: list, out_path: str | Path | None = None) -> tuple[str, str]:
    """Render CSV and aligned-table artifacts for one or more runs.

    When ``out_path`` is given the CSV lands there and the table next to
    it with a ``.txt`` suffix.
    """
    if not records:
        raise ValueError("need at least one run record")
    rows = [report_row(record) for record in records]
    csv_text = render_csv(rows)
    table_text = render_table(rows)
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        out_path.write_text(csv_text)
        out_path.with_suffix(".txt").write_text(table_text)
    return csv_text, table_text
