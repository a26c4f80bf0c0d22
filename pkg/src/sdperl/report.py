"""Report artifacts for a finished run.

Every file is a pure function of the report, so emitting twice (or emitting
two runs with the same config and seed) gives identical bytes. Wall-clock
time is deliberately left out of the data files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

from .classifier import metrics_dict, write_metrics_csv
from .runner import PheromoneMode, RunReport

REPORT_FILES = ("metrics.csv", "pheromone.csv", "training_log.csv", "best_actions.json",
                "config.json", "episode_scores.csv")


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


def _write_rows(path: Path, cols, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in cols])


def _write_json(path: Path, doc) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _prepare(directory) -> Path:
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write-probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"cannot write report to {out}: {exc}") from exc
    return out


def emit_report(report: RunReport, directory, svg: bool = False, checkpoint: bool = True) -> Path:
    """Write all artifacts for ``report`` into ``directory`` and return it."""
    out = _prepare(directory)
    names = report.feature_names

    write_metrics_csv(out / "metrics.csv", [
        {"split": "test", **metrics_dict(report.test_metrics)},
        {"split": "eval_best", **metrics_dict(report.best_eval_metrics)},
    ])
    report.pheromone.to_csv(out / "pheromone.csv", names)
    if report.training_log:
        _write_rows(out / "training_log.csv", list(report.training_log[0]), report.training_log)
    else:
        _write_rows(out / "training_log.csv", ["timestep"], [])
    _write_rows(out / "episode_scores.csv", ["episode", "score", "baseline", "seeded_count"],
                [{"episode": i, "score": ep.score, "baseline": ep.baseline,
                  "seeded_count": ep.seeded_count} for i, ep in enumerate(report.episodes)])

    _write_json(out / "best_actions.json", {
        "pheromone_mode": PheromoneMode(report.config.pheromone_mode).value,
        "best_feature_ids": report.best_subset,
        "best_feature_names": [names[i] for i in report.best_subset],
        "best_eval_score": report.best_score,
        "test_feature_ids": report.test_subset,
        "test_feature_names": [names[i] for i in report.test_subset],
    })
    _write_json(out / "config.json", {
        "config": report.config.to_dict(),
        "used_split_seed": report.used_seed,
        "episodes": len(report.episodes),
        "steps": report.steps_taken,
        "embedding": None if report.embedding is None else report.embedding.manifest(),
    })
    report.classifier.to_json(out / "model.json", names)
    if checkpoint and report.agent is not None:
        report.agent.save(out / "agent.json")
    if svg:
        write_svg_chart(out / "episode_scores.svg", report.episode_scores,
                        "best-so-far and per-episode score", running_max=True)
    return out


def emit_sweep(rows: list[dict], directory, svg: bool = False) -> Path:
    """Write the metrics-vs-M table produced by a feature-count sweep."""
    if not rows:
        raise ValueError("empty sweep")
    out = _prepare(directory)
    _write_rows(out / "metrics_vs_m.csv", list(rows[0]), rows)
    if svg:
        write_svg_chart(out / "metrics_vs_m.svg", [r["f1"] for r in rows], "test F1 by M",
                        x=[r["M"] for r in rows])
    return out


def write_svg_chart(path, values, title: str, x=None, running_max: bool = False,
                    width: int = 640, height: int = 320) -> None:
    """A minimal single-file SVG line chart, no plotting library required."""
    values = [float(v) for v in values]
    if not values:
        raise ValueError("nothing to plot")
    x = list(range(len(values))) if x is None else [float(v) for v in x]
    series = [values]
    if running_max:
        best, acc = [], float("-inf")
        for v in values:
            acc = max(acc, v)
            best.append(acc)
        series.append(best)
    pad = 40
    lo = min(min(s) for s in series)
    hi = max(max(s) for s in series)
    span_y = (hi - lo) or 1.0
    span_x = (max(x) - min(x)) or 1.0

    def px(xv, yv):
        return (pad + (xv - min(x)) / span_x * (width - 2 * pad),
                height - pad - (yv - lo) / span_y * (height - 2 * pad))

    colors = ("#4878a8", "#c04040")
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{pad}" y="20" font-size="14">{title}</text>',
             f'<text x="4" y="{pad}" font-size="10">{hi:.3f}</text>',
             f'<text x="4" y="{height - pad}" font-size="10">{lo:.3f}</text>']
    for s, color in zip(series, colors):
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in (px(xv, yv) for xv, yv in zip(x, s)))
        lines.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
    lines.append("</svg>")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_best_score(run_dir) -> float:
    with open(Path(run_dir) / "best_actions.json", encoding="utf-8") as fh:
        return float(json.load(fh)["best_eval_score"])
