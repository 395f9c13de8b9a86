"""Run reports: timing/score breakdown, JSON schema and a plain-text table."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import jsonschema

REPORT_SCHEMA_ID = "qfhpo-run-report"
REPORT_VERSION = 1
TIME_DECIMALS = 6

# stage timings summed into the proposed-pipeline total
STAGE_FIELDS = (
    "sample_generation_time_s",
    "load_data_time_s",
    "vqa_time_s",
    "finding_best_hps_time_s",
    "quantum_to_classic_mapping_time_s",
    "original_dataset_load_time_s",
    "model_training_time_s",
)
TIMING_FIELDS = STAGE_FIELDS + (
    "classical_baseline_time_s",
    "total_proposed_time_s",
    "time_saving_s",
    "time_saving_percent",
)


def seconds(t: float) -> float:
    return round(float(t), TIME_DECIMALS)


@dataclass
class RunReport:
    model: str = ""
    metric: str = ""
    direction: str = "maximize"
    classical_method: str = ""
    n_hps: int = 0
    n_qubits: int = 0
    n_layers: int = 0
    n_samples: int = 0
    parallelism: int = 1
    classical_baseline_time_s: Optional[float] = None
    total_proposed_time_s: Optional[float] = None
    time_saving_s: Optional[float] = None
    time_saving_percent: Optional[float] = None
    sample_generation_time_s: Optional[float] = None
    load_data_time_s: Optional[float] = None
    vqa_time_s: Optional[float] = None
    finding_best_hps_time_s: Optional[float] = None
    quantum_to_classic_mapping_time_s: Optional[float] = None
    original_dataset_load_time_s: Optional[float] = None
    model_training_time_s: Optional[float] = None
    surrogate_loss: Optional[float] = None
    predicted_raw_score: Optional[float] = None
    proposed_train_score: Optional[float] = None
    proposed_test_score: Optional[float] = None
    original_train_score: Optional[float] = None
    original_test_score: Optional[float] = None
    dev_score: Optional[float] = None
    dev_score_percent: Optional[float] = None
    best_assignment: Dict[str, Any] = field(default_factory=dict)
    baseline_best_assignment: Dict[str, Any] = field(default_factory=dict)
    flags: List[str] = field(default_factory=list)
    error: Optional[str] = None

    def finalize(self) -> "RunReport":
        """Fill the derived totals from the stage timings and scores."""
        stages = [getattr(self, f) for f in STAGE_FIELDS]
        if all(s is not None for s in stages):
            total = 0.0
            for s in stages:
                total += s
            self.total_proposed_time_s = total
        if self.classical_baseline_time_s is not None and self.total_proposed_time_s is not None:
            self.time_saving_s = self.classical_baseline_time_s - self.total_proposed_time_s
            if self.classical_baseline_time_s > 0:
                self.time_saving_percent = 100 * self.time_saving_s / self.classical_baseline_time_s
            elif "zero_classical_time" not in self.flags:
                self.flags.append("zero_classical_time")
        if self.proposed_test_score is not None and self.original_test_score is not None:
            self.dev_score = self.proposed_test_score - self.original_test_score
            if self.original_test_score != 0:
                self.dev_score_percent = 100 * self.dev_score / abs(self.original_test_score)
            else:
                self.dev_score_percent = 0.0
        return self

    def to_dict(self) -> Dict[str, Any]:
        return {"schema": REPORT_SCHEMA_ID, "version": REPORT_VERSION, **asdict(self)}

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "RunReport":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})

    def missing_fields(self) -> List[str]:
        return [f.name for f in fields(self)
                if f.name != "error" and getattr(self, f.name) is None]

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


_num = {"type": ["number", "null"]}
REPORT_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["schema", "version"] + [f.name for f in fields(RunReport)],
    "properties": {
        "schema": {"const": REPORT_SCHEMA_ID},
        "version": {"const": REPORT_VERSION},
        "model": {"type": "string"},
        "metric": {"type": "string"},
        "direction": {"enum": ["maximize", "minimize"]},
        "classical_method": {"type": "string"},
        "n_hps": {"type": "integer", "minimum": 0},
        "n_qubits": {"type": "integer", "minimum": 0},
        "n_layers": {"type": "integer", "minimum": 0},
        "n_samples": {"type": "integer", "minimum": 0},
        "parallelism": {"type": "integer", "minimum": 1},
        **{name: {"type": ["number", "null"], "minimum": 0}
           for name in STAGE_FIELDS + ("classical_baseline_time_s", "total_proposed_time_s")},
        "time_saving_s": _num,
        "time_saving_percent": _num,
        "surrogate_loss": {"type": ["number", "null"], "minimum": 0},
        "predicted_raw_score": _num,
        "proposed_train_score": _num,
        "proposed_test_score": _num,
        "original_train_score": _num,
        "original_test_score": _num,
        "dev_score": _num,
        "dev_score_percent": _num,
        "best_assignment": {"type": "object"},
        "baseline_best_assignment": {"type": "object"},
        "flags": {"type": "array", "items": {"type": "string"}},
        "error": {"type": ["string", "null"]},
    },
    "additionalProperties": False,
}


def check_arithmetic(d: Dict[str, Any]) -> List[str]:
    """Violations of the timing identities (empty list when consistent)."""
    problems = []
    classical, proposed = d.get("classical_baseline_time_s"), d.get("total_proposed_time_s")
    saving, percent = d.get("time_saving_s"), d.get("time_saving_percent")
    if classical is not None and proposed is not None:
        if saving != classical - proposed:
            problems.append("time_saving_s != classical_baseline_time_s - total_proposed_time_s")
        if classical > 0 and percent != 100 * saving / classical:
            problems.append("time_saving_percent != 100 * time_saving_s / classical")
    if proposed is not None:
        vqa, find = d.get("vqa_time_s"), d.get("finding_best_hps_time_s")
        if vqa is not None and find is not None and proposed < vqa + find:
            problems.append("total_proposed_time_s < vqa_time_s + finding_best_hps_time_s")
    return problems


def validate_report(d: Dict[str, Any]) -> None:
    """Raise ``ValueError`` if ``d`` violates the schema or the timing identities."""
    try:
        jsonschema.validate(d, REPORT_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ValueError(f"report schema violation: {exc.message}") from exc
    problems = check_arithmetic(d)
    if problems:
        raise ValueError("; ".join(problems))


def content_view(d: Dict[str, Any]) -> Dict[str, Any]:
    """Report dict without wall-clock fields, for reproducibility comparisons."""
    return {k: v for k, v in d.items() if k not in TIMING_FIELDS}


# (label, field, scale, format)
TABLE_ROWS = (
    ("Classical {model} performance time (s)", "classical_baseline_time_s", 1, "{:.2f}"),
    ("Total proposed model performance time (s)", "total_proposed_time_s", 1, "{:.2f}"),
    ("Time saving (s)", "time_saving_s", 1, "{:.2f}"),
    ("Time saving (%)", "time_saving_percent", 1, "{:.2f}"),
    ("Dev Score", "dev_score", 1, "{:.4f}"),
    ("Dev Score (%)", "dev_score_percent", 1, "{:.2f}"),
    ("# HPs", "n_hps", 1, "{:d}"),
    ("# Layers", "n_layers", 1, "{:d}"),
    ("Sample generation (s)", "sample_generation_time_s", 1, "{:.2f}"),
    ("Load Data (ms)", "load_data_time_s", 1e3, "{:.2f}"),
    ("VQA (s)", "vqa_time_s", 1, "{:.2f}"),
    ("Finding Quantum best HPs (s)", "finding_best_hps_time_s", 1, "{:.2f}"),
    ("Data mapping from Quantum to Classic Space (us)",
     "quantum_to_classic_mapping_time_s", 1e6, "{:.2f}"),
    ("Loading Original dataset time (s)", "original_dataset_load_time_s", 1, "{:.2f}"),
    ("Model training (s)", "model_training_time_s", 1, "{:.2f}"),
    ("Proposed model Test score", "proposed_test_score", 1, "{:.4f}"),
    ("Original Train score", "original_train_score", 1, "{:.4f}"),
    ("Original Test Score", "original_test_score", 1, "{:.4f}"),
)


def render_table(reports: Sequence[Union[RunReport, Dict[str, Any]]],
                 case_names: Optional[Sequence[str]] = None) -> str:
    """Text table with one column per report (cases A, B, ... by default)."""
    rows = [r.to_dict() if isinstance(r, RunReport) else r for r in reports]
    if case_names is None:
        case_names = [chr(ord("A") + i) for i in range(len(rows))]
    model = rows[0].get("model", "") if rows else ""
    lines = [["Cases", *case_names]]
    for label, key, scale, fmt in TABLE_ROWS:
        cells = []
        for r in rows:
            v = r.get(key)
            if v is None:
                cells.append("-")
            elif fmt == "{:d}":
                cells.append(fmt.format(int(v)))
            else:
                cells.append(fmt.format(v * scale) if math.isfinite(v * scale) else str(v))
        lines.append([label.format(model=model), *cells])
    widths = [max(len(line[i]) for line in lines) for i in range(len(lines[0]))]
    out = []
    for j, line in enumerate(lines):
        out.append(" | ".join(c.ljust(w) if i == 0 else c.rjust(w)
                              for i, (c, w) in enumerate(zip(line, widths))))
        if j == 0:
            out.append("-+-".join("-" * w for w in widths))
    return "\n".join(out) + "\n"
