"""Final report assembly: summary table, pairwise significance tests,
score-vs-entropy regressions, and SVG figures.

All numbers are taken directly from the stats module outputs; formatting to
two decimals happens only at the table-rendering step.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .coat import QuadScore
from .errors import DataIntegrityError
from .stats import apply_bh, box_summary, ols_fit, paired_t
from .svgplot import plot_box, plot_scatter_fit

BASELINE_ORDER = ("downsample", "random")


@dataclass
class EncoderScores:
    """Everything the report needs for one encoder."""

    name: str
    coat: list[QuadScore]
    coat_mean: float
    coat_std: float
    n_degenerate: int
    tre: list[tuple[str, float, float]]  # (scene_id, score, H)
    tre_mean: float
    tre_std: float
    provenance: dict


def write_tre_csv(path, rows: list[tuple[str, float, float]]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("scene_id", "score", "H_scene"))
        for scene_id, score, h in rows:
            writer.writerow((scene_id, repr(score), repr(h)))


def read_tre_csv(path) -> list[tuple[str, float, float]]:
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            out.append((row["scene_id"], float(row["score"]), float(row["H_scene"])))
    return out


def _encoder_order(names: list[str]) -> list[str]:
    baselines = [n for n in BASELINE_ORDER if n in names]
    rest = sorted(n for n in names if n not in BASELINE_ORDER)
    return baselines + rest


def _check_provenance(encoders: list[EncoderScores]) -> dict:
    ref = encoders[0].provenance
    for enc in encoders[1:]:
        if enc.provenance != ref:
            diff = {
                k: (ref.get(k), enc.provenance.get(k))
                for k in set(ref) | set(enc.provenance)
                if ref.get(k) != enc.provenance.get(k)
            }
            raise DataIntegrityError(
                f"score files disagree on provenance: {encoders[0].name} vs {enc.name}: {diff}"
            )
    return ref


def _pairwise(encoders: list[EncoderScores], metric: str) -> list:
    results = []
    for i, ea in enumerate(encoders):
        for eb in encoders[i + 1 :]:
            if metric == "coat":
                sa = {q.quad_id: q.score for q in ea.coat if q.score is not None}
                sb = {q.quad_id: q.score for q in eb.coat if q.score is not None}
            else:
                sa = {sid: s for sid, s, _ in ea.tre}
                sb = {sid: s for sid, s, _ in eb.tre}
            shared = sorted(set(sa) & set(sb))
            if len(shared) < 2:
                continue
            results.append(
                paired_t(
                    [sa[k] for k in shared],
                    [sb[k] for k in shared],
                    model_a=ea.name,
                    model_b=eb.name,
                )
            )
    return apply_bh(results) if results else []


def build_report(encoders: list[EncoderScores], out_dir, config_hash: str) -> dict:
    """Write the report directory and return the RunReport document."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    order = _encoder_order([e.name for e in encoders])
    by_name = {e.name: e for e in encoders}
    encoders = [by_name[n] for n in order]
    provenance = _check_provenance(encoders)

    # summary table
    with open(out_dir / "table.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(("encoder", "a_coat", "a_tre", "n_coat_valid", "n_coat_degenerate", "n_tre"))
        for e in encoders:
            writer.writerow(
                (
                    e.name,
                    f"{e.coat_mean:.2f} ± {e.coat_std:.2f}",
                    f"{e.tre_mean:.2f} ± {e.tre_std:.2f}",
                    sum(1 for q in e.coat if q.score is not None),
                    e.n_degenerate,
                    len(e.tre),
                )
            )
    with open(out_dir / "table.md", "w") as fh:
        fh.write("| Encoder | A-COAT | A-TRE |\n|---|---|---|\n")
        for e in encoders:
            fh.write(
                f"| {e.name} | {e.coat_mean:.2f} ± {e.coat_std:.2f} "
                f"| {e.tre_mean:.2f} ± {e.tre_std:.2f} |\n"
            )

    # pairwise significance
    tests = {"coat": _pairwise(encoders, "coat"), "tre": _pairwise(encoders, "tre")}
    with open(out_dir / "pairwise_tests.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("metric", "model_a", "model_b", "t", "df", "p", "p_bh", "significant", "degenerate")
        )
        for metric, rows in tests.items():
            for r in rows:
                writer.writerow(
                    (metric, r.model_a, r.model_b, repr(r.t), r.df, repr(r.p_two_sided),
                     repr(r.p_bh_adjusted), r.significant, r.degenerate)
                )

    # regressions and figures
    regressions = []
    for e in encoders:
        pairs = [(q.h_quad, q.score) for q in e.coat if q.score is not None]
        jobs = [("coat", np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]),
                 "H_quad")]
        jobs.append(
            ("tre", np.array([h for _, _, h in e.tre]), np.array([s for _, s, _ in e.tre]), "H")
        )
        for metric, x, y, x_name in jobs:
            if x.size < 3 or np.ptp(x) == 0.0:
                continue
            fit = ols_fit(x, y)
            regressions.append((e.name, metric, x_name, fit))
            svg = plot_scatter_fit(
                x, y, fit,
                title=f"{e.name}: {metric.upper()} score vs {x_name}",
                x_label=x_name, y_label=f"{metric} score",
            )
            (out_dir / f"fig_reg_{e.name}_{metric}.svg").write_text(svg)
    with open(out_dir / "regressions.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("encoder", "metric", "x", "slope", "intercept", "slope_ci_low", "slope_ci_high",
             "r2", "n")
        )
        for name, metric, x_name, fit in regressions:
            writer.writerow(
                (name, metric, x_name, repr(fit.slope), repr(fit.intercept),
                 repr(fit.slope_ci_low), repr(fit.slope_ci_high), repr(fit.r2), fit.n)
            )

    # box plots + summaries
    boxes = []
    coat_models = [
        (e.name, np.array([q.score for q in e.coat if q.score is not None])) for e in encoders
    ]
    coat_models = [(n, s) for n, s in coat_models if s.size]
    if coat_models:
        (out_dir / "fig_box_coat.svg").write_text(
            plot_box(coat_models, "A-COAT score distribution")
        )
        boxes += [("coat", n, box_summary(s)) for n, s in coat_models]
    tre_models = [(e.name, np.array([s for _, s, _ in e.tre])) for e in encoders if e.tre]
    if tre_models:
        (out_dir / "fig_box_tre.svg").write_text(plot_box(tre_models, "A-TRE score distribution"))
        boxes += [("tre", n, box_summary(s)) for n, s in tre_models]
    with open(out_dir / "box_summaries.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ("metric", "encoder", "median", "q1", "q3", "notch_low", "notch_high",
             "whisker_low", "whisker_high", "n")
        )
        for metric, name, s in boxes:
            writer.writerow(
                (metric, name, repr(s.median), repr(s.q1), repr(s.q3), repr(s.notch_low),
                 repr(s.notch_high), repr(s.whisker_low), repr(s.whisker_high), s.n)
            )

    doc = {
        "encoders": [
            {
                "name": e.name,
                "a_coat_mean": e.coat_mean,
                "a_coat_std": e.coat_std,
                "a_tre_mean": e.tre_mean,
                "a_tre_std": e.tre_std,
                "n_coat_valid": sum(1 for q in e.coat if q.score is not None),
                "n_coat_degenerate": e.n_degenerate,
                "n_tre": len(e.tre),
            }
            for e in encoders
        ],
        "pairwise_tests": {
            metric: [
                {
                    "model_a": r.model_a, "model_b": r.model_b, "t": r.t, "df": r.df,
                    "p": r.p_two_sided, "p_bh": r.p_bh_adjusted,
                    "significant": r.significant, "degenerate": r.degenerate,
                }
                for r in rows
            ]
            for metric, rows in tests.items()
        },
        "regressions": [
            {
                "encoder": name, "metric": metric, "x": x_name, "slope": fit.slope,
                "intercept": fit.intercept, "slope_ci": [fit.slope_ci_low, fit.slope_ci_high],
                "r2": fit.r2, "n": fit.n,
            }
            for name, metric, x_name, fit in regressions
        ],
        "provenance": dict(provenance, config_hash=config_hash),
    }
    with open(out_dir / "report.json", "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return doc
