"""CSV and JSON writers for run, batch, and paired results."""
from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict

import pandas as pd

from .engine import BatchResult, PairedResult
from .state import RunResult

log = logging.getLogger(__name__)


def _write_csv(frame: pd.DataFrame, path: Path) -> Path:
    # Default float rendering is repr(), the shortest string that round-trips.
    frame.to_csv(path, index=False, lineterminator="\n")
    return path


def _write_json(payload: Dict[str, Any], path: Path) -> Path:
    path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def write_run(result: RunResult, out_dir: Path) -> Dict[str, Path]:
    """Write the metrics CSV, summary JSON, and whichever dumps the run settings request."""
    out_dir.mkdir(parents=True, exist_ok=True)
    settings = result.config.run
    written = {
        "metrics": _write_csv(result.metrics(), out_dir / "metrics.csv"),
        "summary": _write_json(result.as_dict(), out_dir / "summary.json"),
    }
    if settings.events:
        written["events"] = _write_csv(result.events_frame(), out_dir / "events.csv")
    if settings.dump_timeline:
        written["timeline"] = _write_csv(result.timeline.to_frame(), out_dir / "timeline.csv")
    if settings.dump_network:
        written["edges"] = _write_csv(result.graph.to_frame(), out_dir / "edges.csv")
    if settings.dump_population:
        written["population"] = _write_csv(result.population.params.to_frame(), out_dir / "population.csv")
    for name, path in written.items():
        log.debug("wrote %s → %s", name, path)
    return written


def write_batch(result: BatchResult, out_dir: Path) -> Dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    return {
        "summaries": _write_csv(result.frame, out_dir / "batch_summaries.csv"),
        "statistics": _write_csv(result.statistics.rename_axis("metric").reset_index(), out_dir / "batch_statistics.csv"),
        "summary": _write_json(result.as_dict(), out_dir / "batch_summary.json"),
    }


def write_paired(result: PairedResult, out_dir: Path) -> Dict[str, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    return {
        "deltas": _write_csv(result.frame, out_dir / "paired_deltas.csv"),
        "summary": _write_json(result.as_dict(), out_dir / "paired_summary.json"),
    }
