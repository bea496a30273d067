"""Post-processing of attack traces: plot-ready distance curves, the
probability table at the attack's milestone states, and the per-trace
perceivability ratio (final distance / rounds run).

Inputs are the trace CSV + summary JSON pairs that attack runs write; a
trace named foo.csv looks for its summary at foo.summary.json.
"""

from __future__ import annotations

import csv
import json
import os

from .errors import MalformedFileError

_COLUMNS = (
    "iteration",
    "gap",
    "distance",
    "predicted_class",
    "target_prob",
    "max_other_prob",
    "queries",
)


def read_trace_csv(path: str) -> list[dict]:
    """Parse a trace CSV into typed row dicts."""
    rows = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or tuple(reader.fieldnames) != _COLUMNS:
                raise MalformedFileError(
                    f"{path}: trace header {reader.fieldnames} != {list(_COLUMNS)}"
                )
            for raw in reader:
                rows.append(
                    {
                        "iteration": int(raw["iteration"]),
                        "gap": float(raw["gap"]),
                        "distance": float(raw["distance"]),
                        "predicted_class": int(raw["predicted_class"]),
                        "target_prob": float(raw["target_prob"]),
                        "max_other_prob": float(raw["max_other_prob"]),
                        "queries": int(raw["queries"]),
                    }
                )
    except ValueError as exc:
        raise MalformedFileError(f"{path}: unparsable trace cell ({exc})") from exc
    if not rows:
        raise MalformedFileError(f"{path}: trace has no rows")
    return rows


def summary_path_for(trace_path: str) -> str:
    stem, _ = os.path.splitext(trace_path)
    return stem + ".summary.json"


def read_summary(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise MalformedFileError(f"{path}: not valid JSON ({exc})") from exc


def trace_label(trace_path: str) -> str:
    return os.path.splitext(os.path.basename(trace_path))[0]


def distance_curves(traces: dict[str, list[dict]]) -> str:
    """Combined long-format CSV of every trace's distance series."""
    lines = ["trace,iteration,distance"]
    for label in sorted(traces):
        for row in traces[label]:
            lines.append(f"{label},{row['iteration']},{row['distance']!r}")
    return "\n".join(lines) + "\n"


def probability_stages(traces: dict[str, list[dict]], summaries: dict[str, dict]) -> str:
    """Per trace: the class scores at the start, at the first time the
    target took over (absent when it never did), and at the last recorded
    round."""
    lines = ["trace,stage,iteration,predicted_class,target_prob,max_other_prob"]
    for label in sorted(traces):
        rows = traces[label]
        by_iteration = {row["iteration"]: row for row in rows}
        mis = summaries[label].get("first_misclassification_iteration")
        stages = [
            ("start", rows[0]),
            ("misclassification", None if mis is None else by_iteration.get(mis)),
            ("final", rows[-1]),
        ]
        for stage, row in stages:
            if row is None:
                lines.append(f"{label},{stage},absent,absent,absent,absent")
            else:
                lines.append(
                    f"{label},{stage},{row['iteration']},{row['predicted_class']},"
                    f"{row['target_prob']!r},{row['max_other_prob']!r}"
                )
    return "\n".join(lines) + "\n"


def perceivability(summaries: dict[str, dict]) -> list[tuple[str, float, int, float]]:
    """(trace, final_distance, iterations, ratio) sorted by ratio, largest
    first — the noisiest-per-round runs on top."""
    entries = []
    for label in sorted(summaries):
        summary = summaries[label]
        final_distance = float(summary["final_distance"])
        iterations = int(summary["iterations"])
        ratio = final_distance / iterations if iterations else 0.0
        entries.append((label, final_distance, iterations, ratio))
    entries.sort(key=lambda e: (-e[3], e[0]))
    return entries


def perceivability_csv(summaries: dict[str, dict]) -> str:
    lines = ["trace,final_distance,iterations,ratio"]
    for label, final_distance, iterations, ratio in perceivability(summaries):
        lines.append(f"{label},{final_distance!r},{iterations},{ratio!r}")
    return "\n".join(lines) + "\n"


def build_report(trace_paths: list[str], out_dir: str) -> list[str]:
    """Read trace/summary pairs and write the three report files.

    Returns the written paths.
    """
    traces: dict[str, list[dict]] = {}
    summaries: dict[str, dict] = {}
    for path in trace_paths:
        label = trace_label(path)
        if label in traces:
            raise ValueError(f"duplicate trace name {label!r}")
        traces[label] = read_trace_csv(path)
        summaries[label] = read_summary(summary_path_for(path))

    os.makedirs(out_dir, exist_ok=True)
    written = []
    for name, payload in (
        ("distance_curves.csv", distance_curves(traces)),
        ("probability_stages.csv", probability_stages(traces, summaries)),
        ("perceivability.csv", perceivability_csv(summaries)),
    ):
        target = os.path.join(out_dir, name)
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(payload)
        written.append(target)
    return written
