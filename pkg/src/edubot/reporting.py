"""Figure rendering for exported data. Nothing here runs while the
service handles requests; these helpers operate on files after the fact.

Uses the non-interactive Agg backend so it works headless.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, List

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .core import (  # noqa: E402
    Question,
    ResponseType,
    SurveyResponse,
    aggregate_survey,
    parse_ts,
)
from .persistence import read_csv_rows  # noqa: E402


def render_latency_histogram(samples_ms: Iterable[float], threshold_ms: float,
                             path: Path) -> Path:
    samples = list(samples_ms)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if samples:
        ax.hist(samples, bins=min(40, max(10, len(samples) // 10)),
                color="#4878a8", edgecolor="white")
    ax.axvline(threshold_ms, color="#b04030", linestyle="--",
               label=f"threshold {threshold_ms:g} ms")
    ax.set_xlabel("request latency (ms)")
    ax.set_ylabel("requests")
    ax.set_title("REST latency distribution")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def render_attendance_figure(csv_path: Path, out_path: Path) -> Path:
    rows = read_csv_rows(Path(csv_path))
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(8, 4.5))
    if rows:
        times = sorted(parse_ts(r["checkin_ts"]) for r in rows)
        t0 = times[0]
        offsets = [(t - t0).total_seconds() for t in times]
        ax.step(offsets, range(1, len(times) + 1), where="post",
                color="#4878a8")
        ax.set_xlabel("seconds since first check-in")
    else:
        ax.set_xlabel("time")
    session_id = rows[0]["session_id"] if rows else Path(csv_path).stem
    ax.set_ylabel("students checked in")
    ax.set_title(f"attendance {session_id} ({len(rows)} present)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=110)
    plt.close(fig)
    return out_path


def _responses_from_rows(rows: List[dict], index: int) -> List[SurveyResponse]:
    responses = []
    for row in rows:
        if int(row["question_index"]) != index:
            continue
        rtype = ResponseType(row["response_type"])
        value = row["value"] if rtype is ResponseType.FREE_TEXT else int(row["value"])
        responses.append(SurveyResponse(
            survey_id=row["survey_id"], question_index=index,
            student_id=row["student_id"], response_type=rtype,
            value=value, at=parse_ts(row["ts"]),
        ))
    return responses


def render_survey_figures(csv_path: Path, out_dir: Path) -> List[Path]:
    """One bar chart per question in an exported survey CSV."""
    rows = read_csv_rows(Path(csv_path))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not rows:
        return []
    survey_id = rows[0]["survey_id"]
    written = []
    indexes = sorted({int(r["question_index"]) for r in rows})
    for index in indexes:
        subset = _responses_from_rows(rows, index)
        rtype = subset[0].response_type
        prompt = next(r["prompt"] for r in rows
                      if int(r["question_index"]) == index)
        if rtype is ResponseType.FIVE_LEVEL:
            # option labels are not stored in the CSV; chart by level
            question = Question(index=index, prompt=prompt,
                                response_type=rtype,
                                options=("1", "2", "3", "4", "5"))
        else:
            question = Question(index=index, prompt=prompt, response_type=rtype)
        hist = aggregate_survey(subset, question)
        labels = [b.label for b in hist.buckets]
        counts = [b.count for b in hist.buckets]
        fig, ax = plt.subplots(figsize=(8, 4.5))
        ax.bar(range(len(labels)), counts, color="#4878a8")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=30, ha="right")
        ax.set_ylabel("responses")
        ax.set_title(f"{survey_id} q{index}: {prompt[:60]}")
        fig.tight_layout()
        out_path = out_dir / f"{survey_id}-q{index}.png"
        fig.savefig(out_path, dpi=110)
        plt.close(fig)
        written.append(out_path)
    return written


def render_report(data_dir: Path, out_dir: Path) -> Path:
    """Render figures for every exported CSV and index them in report.csv.

    The index is the delimited summary (artifact, kind, rows, figure)
    and the PNG files land next to it.
    """
    data_dir = Path(data_dir)
    # accept the service root or its data/ subdirectory
    if not (data_dir / "data").exists() and (
            (data_dir / "attendance").exists() or (data_dir / "surveys").exists()):
        data_dir = data_dir.parent
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    index_rows = []
    attendance_dir = data_dir / "data" / "attendance"
    if attendance_dir.exists():
        for path in sorted(attendance_dir.glob("*.csv")):
            figure = render_attendance_figure(path, out_dir / f"{path.stem}.png")
            index_rows.append([str(path), "attendance",
                               str(len(read_csv_rows(path))), figure.name])
    surveys_dir = data_dir / "data" / "surveys"
    if surveys_dir.exists():
        for path in sorted(surveys_dir.glob("*.csv")):
            figures = render_survey_figures(path, out_dir)
            names = ";".join(f.name for f in figures)
            index_rows.append([str(path), "survey",
                               str(len(read_csv_rows(path))), names])
    report_path = out_dir / "report.csv"
    with open(report_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["artifact", "kind", "rows", "figures"])
        writer.writerows(index_rows)
    return report_path
