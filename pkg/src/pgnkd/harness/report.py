"""Per-episode CSV and the achievement-rate summary table."""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .evaluate import PLANNER_LABELS, EpisodeRecord, EvalResult

CSV_FIELDS = ("workspace", "planner", "episode", "steps", "reached", "final_distance")
PLANNER_ORDER = ("random", "nnql", "mlp")


def percent(result: EvalResult) -> str:
    return f"{100.0 * result.rate:.2f}"


def episodes_csv(results: list[EvalResult]) -> str:
    if not results:
        raise ValueError("report needs at least one result")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for r in results:
        for i, e in enumerate(r.episodes):
            writer.writerow([r.workspace, r.planner, i, e.steps, int(e.reached), repr(float(e.final_distance))])
    return buf.getvalue()


def read_episodes_csv(text: str) -> list[EvalResult]:
    """Inverse of :func:`episodes_csv` (start poses are not kept in the CSV)."""
    results: dict[tuple[str, str], EvalResult] = {}
    for row in csv.DictReader(io.StringIO(text)):
        key = (row["workspace"], row["planner"])
        res = results.setdefault(key, EvalResult(*key))
        res.episodes.append(EpisodeRecord(None, int(row["steps"]), row["reached"] == "1",
                                          float(row["final_distance"])))
    return list(results.values())


def summary_table(results: list[EvalResult]) -> str:
    """One row per workspace; Random, NNQL, MLP columns in percent, '-' where missing."""
    if not results:
        raise ValueError("report needs at least one result")
    workspaces = list(dict.fromkeys(r.workspace for r in results))
    by_key = {(r.workspace, r.planner): r for r in results}
    headers = ["Workspace"] + [f"{PLANNER_LABELS[p]} (%)" for p in PLANNER_ORDER]
    rows = [[ws] + [percent(by_key[ws, p]) if (ws, p) in by_key else "-" for p in PLANNER_ORDER]
            for ws in workspaces]
    widths = [max(len(str(row[c])) for row in [headers] + rows) for c in range(len(headers))]
    fmt = lambda row: "  ".join(str(v).ljust(w) if c == 0 else str(v).rjust(w)
                                for c, (v, w) in enumerate(zip(row, widths)))
    lines = [fmt(headers), "  ".join("-" * w for w in widths)] + [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def report(results: list[EvalResult], out_dir=None) -> tuple[str, str]:
    """Return ``(csv_text, summary_text)``, also writing both files when ``out_dir`` is given."""
    csv_text, summary = episodes_csv(results), summary_table(results)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "episodes.csv").write_text(csv_text, encoding="utf-8")
        (out / "summary.txt").write_text(summary, encoding="utf-8")
    return csv_text, summary
