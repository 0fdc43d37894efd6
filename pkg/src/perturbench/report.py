"""Deterministic report and plot-data emission.

Reports are JSON with sorted keys and full-precision floats (shortest
round-trip repr), so identical runs produce identical bytes. Wall-clock
timings go to a separate sidecar file that is excluded from the determinism
contract. Plot data is TSV with a header line.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__

REPORT_NAME = "report.json"
TIMINGS_NAME = "timings.json"


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def write_json(path, payload):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    Path(path).write_text(text)


def write_report(out_dir, payload):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = dict(payload)
    payload["toolkit_version"] = __version__
    write_json(out_dir / REPORT_NAME, payload)
    return out_dir / REPORT_NAME


def write_timings(out_dir, timings):
    write_json(Path(out_dir) / TIMINGS_NAME, timings)


def _format_cell(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_tsv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(header)]
    for row in rows:
        lines.append("\t".join(_format_cell(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def dataset_fingerprint(dataset):
    """SHA-256 over class names, labels, and exact pixel payloads."""
    h = hashlib.sha256()
    for name in dataset.class_names:
        h.update(name.encode())
        h.update(b"\x00")
    h.update(np.ascontiguousarray(dataset.labels, dtype="<i8").tobytes())
    h.update(np.ascontiguousarray(dataset.images, dtype="<f8").tobytes())
    return h.hexdigest()


def attack_config_dict(cfg):
    payload = asdict(cfg)
    if cfg.algorithm != "bim":
        payload.pop("step_size")
        payload.pop("iterations")
    else:
        payload["step_size"] = cfg.resolved_step()
    return payload


def campaign_summary(campaign, campaign_id):
    return {
        "id": campaign_id,
        "config": attack_config_dict(campaign.config),
        "attacked": campaign.attacked,
        "adversarial_examples": campaign.misclassified,
        "fooling_rate": campaign.fooling_rate,
        "degenerate": campaign.degenerate,
        "skipped": sum(r.skipped for r in campaign.records),
        "pair_counts": [
            {"source": s, "target": t, "count": n}
            for (s, t), n in sorted(campaign.pair_counts.items())
        ],
    }


def campaign_records(campaign):
    rows = []
    for r in campaign.records:
        rows.append(
            {
                "index": r.index,
                "label": r.label,
                "original_class": r.original_class,
                "original_confidence": r.original_confidence,
                "adversarial_class": r.adversarial_class,
                "adversarial_confidence": r.adversarial_confidence,
                "linf": r.linf,
                "l2": r.l2,
                "success": r.success,
                "skipped": r.skipped,
            }
        )
    return rows
