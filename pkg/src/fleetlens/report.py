"""Comparison-report rendering.

Produces the model x inference grid (rows per model for SVI and MVI,
one column per size) as machine-readable JSON, an aligned markdown table,
a delimited CSV, and a grouped bar figure. The best MVI cell is flagged.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from matplotlib.figure import Figure

from .domain import EvalReport, SplitManifest, Task, Taxonomy


@dataclass(frozen=True)
class ReportRow:
    """One model-size result pair in the comparison grid."""

    model: str
    size: str
    svi: float
    mvi: float
    unknown_svi: float
    unknown_mvi: float

    @classmethod
    def from_report(cls, model: str, size: str, report: EvalReport) -> "ReportRow":
        return cls(
            model=model,
            size=size,
            svi=report.svi_accuracy,
            mvi=report.mvi_accuracy,
            unknown_svi=report.unknown_rate_svi,
            unknown_mvi=report.unknown_rate_mvi,
        )


@dataclass(frozen=True)
class ReportArtifacts:
    json_path: Path
    md_path: Path
    csv_path: Path
    figure_path: Path | None


def taxonomy_digest(taxonomy: Taxonomy) -> str:
    """Stable content hash of a taxonomy configuration."""
    canonical = json.dumps(taxonomy.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode()).hexdigest()


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_provenance(
    backend_ids: list[str] | None = None,
    taxonomy: Taxonomy | None = None,
    split: SplitManifest | None = None,
    input_files: list[str | Path] | None = None,
) -> dict:
    """Reproducibility trail for a report: who predicted, on what."""
    provenance: dict = {}
    if backend_ids:
        provenance["backend_ids"] = list(backend_ids)
    if taxonomy is not None:
        provenance["taxonomy_digest"] = taxonomy_digest(taxonomy)
    if split is not None:
        provenance["split_seed"] = split.seed
    if input_files:
        provenance["input_digests"] = {
            str(p): file_digest(p) for p in input_files
        }
    return provenance


def render_report(
    task: Task,
    rows: list[ReportRow],
    out_dir: str | Path,
    provenance: dict | None = None,
    basename: str = "report",
    figure: bool = True,
) -> ReportArtifacts:
    """Write report.{json,md,csv} and a bar figure under ``out_dir``."""
    if not rows:
        raise ValueError("report needs at least one row")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    document = {
        "task": task.value,
        "rows": [
            {
                "model": r.model,
                "size": r.size,
                "svi": r.svi,
                "mvi": r.mvi,
                "unknown_svi": r.unknown_svi,
                "unknown_mvi": r.unknown_mvi,
            }
            for r in rows
        ],
        "best_mvi": _best_mvi(rows),
        "provenance": provenance or {},
    }
    json_path = out_dir / f"{basename}.json"
    json_path.write_text(json.dumps(document, indent=2) + "\n")

    md_path = out_dir / f"{basename}.md"
    md_path.write_text(_markdown_grid(task, rows))

    csv_path = out_dir / f"{basename}.csv"
    csv_lines = ["model,size,svi,mvi,unknown_svi,unknown_mvi"]
    csv_lines += [
        f"{r.model},{r.size},{r.svi:.6f},{r.mvi:.6f},{r.unknown_svi:.6f},{r.unknown_mvi:.6f}"
        for r in rows
    ]
    csv_path.write_text("".join(line + "\n" for line in csv_lines))

    figure_path = None
    if figure:
        figure_path = out_dir / f"{basename}.png"
        _render_figure(task, rows, figure_path)

    return ReportArtifacts(
        json_path=json_path, md_path=md_path, csv_path=csv_path, figure_path=figure_path
    )


def _best_mvi(rows: list[ReportRow]) -> dict:
    best = max(rows, key=lambda r: r.mvi)
    return {"model": best.model, "size": best.size, "mvi": best.mvi}


def _ordered_unique(values: list[str]) -> list[str]:
    seen: dict[str, None] = {}
    for v in values:
        seen.setdefault(v)
    return list(seen)


def _markdown_grid(task: Task, rows: list[ReportRow]) -> str:
    """Model x {SVI, MVI} rows against size columns; best MVI in bold."""
    models = _ordered_unique([r.model for r in rows])
    sizes = _ordered_unique([r.size for r in rows])
    cell = {(r.model, r.size): r for r in rows}
    best = _best_mvi(rows)

    def fmt(row: ReportRow | None, inference: str) -> str:
        if row is None:
            return "-"
        value = row.svi if inference == "SVI" else row.mvi
        text = f"{100 * value:.2f}"
        if inference == "MVI" and row.model == best["model"] and row.size == best["size"]:
            text = f"**{text}**"
        return text

    header = ["Model", "Inference", *sizes]
    lines = [
        f"# Accuracy comparison: {task.value}",
        "",
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    for model in models:
        for inference in ("SVI", "MVI"):
            cells = [fmt(cell.get((model, size)), inference) for size in sizes]
            lines.append("| " + " | ".join([model, inference, *cells]) + " |")
    return "".join(line + "\n" for line in lines)


def _render_figure(task: Task, rows: list[ReportRow], path: Path) -> None:
    fig = Figure(figsize=(max(6.0, 1.6 * len(rows)), 4.0))
    ax = fig.add_subplot(111)
    labels = [f"{r.model}\n{r.size}" for r in rows]
    xs = range(len(rows))
    width = 0.38
    ax.bar([x - width / 2 for x in xs], [100 * r.svi for r in rows], width, label="SVI")
    ax.bar([x + width / 2 for x in xs], [100 * r.mvi for r in rows], width, label="MVI")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 100)
    ax.set_title(f"SVI vs MVI accuracy: {task.value}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)


@dataclass(frozen=True)
class PairwiseRow:
    """One attribute-size pair compared across two backend variants."""

    attribute: str
    size: str
    baseline: float
    variant: float


def render_pairwise(
    rows: list[PairwiseRow],
    out_path: str | Path,
    baseline_label: str = "No Fine Tuning (%)",
    variant_label: str = "Fine Tuning (%)",
) -> Path:
    """Two-column comparison table (e.g. zero-shot vs fine-tuned)."""
    if not rows:
        raise ValueError("comparison needs at least one row")
    header = ["Attribute", "Size", baseline_label, variant_label]
    lines = [
        "| " + " | ".join(header) + " |",
        "|" + "|".join("---" for _ in header) + "|",
    ]
    for r in rows:
        lines.append(
            f"| {r.attribute} | {r.size} | {100 * r.baseline:.2f} | {100 * r.variant:.2f} |"
        )
    out_path = Path(out_path)
    out_path.write_text("".join(line + "\n" for line in lines))
    return out_path
