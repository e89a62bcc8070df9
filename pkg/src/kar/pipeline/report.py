"""Report writers: a TSV table for people, JSONL records for plotting, and
PNG figures (when enabled)."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path


def to_tsv(records, columns=None):
    if columns is None:
        columns = list(records[0]) if records else []
    buf = io.StringIO()
    w = csv.DictWriter(buf, columns, delimiter="\t", extrasaction="ignore", lineterminator="\n")
    w.writeheader()
    for r in records:
        w.writerow({k: _fmt(r.get(k)) for k in columns})
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    return "" if v is None else v


def write_jsonl(path, records):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r, sort_keys=True) + "\n")
    return path


def write_tsv(path, records, columns=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(to_tsv(records, columns), encoding="utf-8")
    return path


def training_records(report):
    return [dict(r, backbone=report.backbone, mode=report.mode) for r in report.epochs]


def write_training_report(report, out_dir, figures=True, prefix="train"):
    out_dir = Path(out_dir)
    recs = training_records(report)
    paths = {
        "epochs_tsv": write_tsv(out_dir / f"{prefix}_epochs.tsv", recs,
                                ["backbone", "mode", "epoch", "train_logloss", "test_auc",
                                 "test_logloss", "seconds"]),
        "epochs_jsonl": write_jsonl(out_dir / f"{prefix}_epochs.jsonl", recs),
        "summary_json": out_dir / f"{prefix}_summary.json",
    }
    summary = report.to_dict()
    summary.pop("batch_losses")
    paths["summary_json"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    if figures:
        from .. import plotting

        paths["curve_png"] = plotting.training_curve(report, out_dir / f"{prefix}_curve.png")
    return paths


ABLATION_COLUMNS = ["backbone", "mode", "auc", "logloss", "best_epoch", "train_s"]


def write_ablation_report(records, out_dir, figures=True, prefix="ablation"):
    out_dir = Path(out_dir)
    paths = {
        "tsv": write_tsv(out_dir / f"{prefix}.tsv", records, ABLATION_COLUMNS),
        "jsonl": write_jsonl(out_dir / f"{prefix}.jsonl", records),
    }
    if figures:
        from .. import plotting

        paths["png"] = plotting.ablation_bars(records, out_dir / f"{prefix}.png")
    return paths


BENCH_COLUMNS = ["backbone", "variant", "batches", "batch_size", "mean_s", "std_s", "median_s",
                 "min_s", "ratio_to_base"]


def write_bench_report(table, out_dir, figures=True, prefix="bench"):
    out_dir = Path(out_dir)
    recs = table.to_records()
    paths = {
        "tsv": write_tsv(out_dir / f"{prefix}.tsv", recs, BENCH_COLUMNS),
        "jsonl": write_jsonl(out_dir / f"{prefix}.jsonl", recs),
    }
    if figures:
        from .. import plotting

        paths["png"] = plotting.bench_bars(table, out_dir / f"{prefix}.png")
    return paths
