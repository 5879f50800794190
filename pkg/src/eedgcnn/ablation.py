"""Ablation harness: train and score one model per (cell, seed).

Every cell sees the same corpus splits and the same seed list; a cell is a
set of model-config overrides on top of the matrix's base config.
"""

from __future__ import annotations

import itertools
import logging
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import ModelConfig, TrainConfig, apply_overrides, config_dict
from .corpus import split_corpus
from .evaluate import EvalReport, evaluate
from .model import EEDGCNN
from .train import train

log = logging.getLogger(__name__)


@dataclass
class AblationCell:
    name: str
    overrides: dict = field(default_factory=dict)


@dataclass
class AblationMatrix:
    cells: list
    seeds: tuple = (0, 1, 2, 3, 4)
    model: dict = field(default_factory=dict)   # base ModelConfig overrides
    train: dict = field(default_factory=dict)   # base TrainConfig overrides
    eval_split: str = "test"
    select_on_val: bool = True

    def validate(self) -> "AblationMatrix":
        if not self.cells:
            raise ValueError("ablation matrix has no cells")
        names = [c.name for c in self.cells]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate cell names in {names}")
        if not self.seeds:
            raise ValueError("ablation matrix needs at least one seed")
        if self.eval_split not in ("train", "val", "test"):
            raise ValueError(f"eval_split must be train, val or test; got {self.eval_split!r}")
        for cell in self.cells:
            self.configs(cell, self.seeds[0])
        return self

    def configs(self, cell: AblationCell, seed: int) -> tuple[ModelConfig, TrainConfig]:
        mcfg = apply_overrides(ModelConfig(), {**self.model, **cell.overrides, "seed": seed}).validate()
        tcfg = apply_overrides(TrainConfig(), {**self.train, "seed": seed}).validate()
        return mcfg, tcfg


# preset cells --------------------------------------------------------------

def token_feature_cells() -> list[AblationCell]:
    return [AblationCell("SimpleF", {"features": "simple"}), AblationCell("Full", {"features": "full"})]


def input_form_cells() -> list[AblationCell]:
    return [AblationCell("Single sentence", {"input_form": "single"}),
            AblationCell("Sentence pair", {"input_form": "pair"})]


def event_type_cells() -> list[AblationCell]:
    return [
        AblationCell("No Event Type", {"event_type_mode": "none"}),
        AblationCell("One-hot codes", {"event_type_mode": "one_hot"}),
        AblationCell("50D-vectors", {"event_type_mode": "learnable", "d_event": 50}),
        AblationCell("400D-vectors", {"event_type_mode": "learnable", "d_event": 400}),
    ]


def dimension_sweep_cells(dims=(10, 50, 100, 200, 400)) -> list[AblationCell]:
    return [AblationCell(f"{d}D", {"event_type_mode": "learnable", "d_event": int(d)}) for d in dims]


def grid_cells(features=("full",), input_form=("pair",), event_type=("400",)) -> list[AblationCell]:
    """Cross product of axis values; event type values are none, one_hot or a width."""
    cells = []
    for f, form, ev in itertools.product(features, input_form, event_type):
        ov = {"features": f, "input_form": form}
        if ev in ("none", "one_hot"):
            ov["event_type_mode"] = ev
        else:
            ov.update(event_type_mode="learnable", d_event=int(ev))
        cells.append(AblationCell(f"{f}/{form}/{ev}", ov))
    return cells


PRESETS = {
    "token-features": token_feature_cells,
    "input-form": input_form_cells,
    "event-type": event_type_cells,
    "dimension-sweep": dimension_sweep_cells,
}


# running -------------------------------------------------------------------

@dataclass
class CellRun:
    cell: str
    seed: int
    report: EvalReport | None = None
    losses: list = field(default_factory=list)
    error: str | None = None


def run_cell(matrix: AblationMatrix, cell: AblationCell, seed: int, splits) -> CellRun:
    try:
        mcfg, tcfg = matrix.configs(cell, seed)
        model = EEDGCNN.from_corpus(mcfg, splits["train"])
        val = splits["val"] if matrix.select_on_val and splits["val"] else None
        res = train(model, splits["train"], tcfg, val_sentences=val)
        report = evaluate(model, splits[matrix.eval_split])
        report.metadata.update({"cell": cell.name, "seed": seed, "model_config": config_dict(mcfg),
                                "train_config": config_dict(tcfg), "best_epoch": res.best_epoch})
        return CellRun(cell.name, seed, report, res.losses)
    except Exception as exc:  # a failing cell must not stop the harness
        log.warning("cell %s seed %s failed: %s", cell.name, seed, exc)
        return CellRun(cell.name, seed, error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc()}")


def _run_job(args):
    return run_cell(*args)


@dataclass
class SummaryRow:
    cell: str
    runs: int
    failures: int
    id_f1: list
    cls_f1: list

    def stat(self, which: str) -> dict:
        vals = np.asarray(self.id_f1 if which == "identification" else self.cls_f1)
        if vals.size == 0:
            return {"mean": float("nan"), "std": float("nan"), "min": float("nan"), "max": float("nan")}
        return {"mean": float(vals.mean()), "std": float(vals.std()), "min": float(vals.min()), "max": float(vals.max())}


@dataclass
class AblationResult:
    matrix: AblationMatrix
    runs: list

    def summary(self) -> list[SummaryRow]:
        rows = []
        for cell in self.matrix.cells:
            mine = [r for r in self.runs if r.cell == cell.name]
            ok = [r for r in mine if r.report is not None]
            rows.append(SummaryRow(cell.name, len(mine), len(mine) - len(ok),
                                   [r.report.identification.f1 for r in ok],
                                   [r.report.classification.f1 for r in ok]))
        return rows

    def row(self, name: str) -> SummaryRow:
        for r in self.summary():
            if r.cell == name:
                return r
        raise KeyError(name)

    def table(self) -> str:
        rows = self.summary()
        width = max(len("System"), *(len(r.cell) for r in rows))
        lines = [f"{'System':<{width}}  {'Identification':>22}  {'Classification':>22}  {'min/max cls':>13}  runs"]
        for r in rows:
            i, c = r.stat("identification"), r.stat("classification")
            fail = f" ({r.failures} failed)" if r.failures else ""
            lines.append(
                f"{r.cell:<{width}}  {100 * i['mean']:8.1f}% +/- {100 * i['std']:5.1f}  "
                f"{100 * c['mean']:8.1f}% +/- {100 * c['std']:5.1f}  "
                f"{100 * c['min']:5.1f}/{100 * c['max']:5.1f}  {r.runs}{fail}"
            )
        return "\n".join(lines)

    def as_dict(self) -> dict:
        return {
            "seeds": list(self.matrix.seeds),
            "base_model": self.matrix.model,
            "base_train": self.matrix.train,
            "eval_split": self.matrix.eval_split,
            "summary": [{"cell": r.cell, "runs": r.runs, "failures": r.failures,
                         "identification": r.stat("identification"),
                         "classification": r.stat("classification")} for r in self.summary()],
            "runs": [{"cell": r.cell, "seed": r.seed, "error": r.error,
                      "report": r.report.as_dict() if r.report else None, "losses": r.losses} for r in self.runs],
        }


def run_ablation(matrix: AblationMatrix, sentences, workers: int = 1) -> AblationResult:
    """Run every (cell, seed) pair; failures are recorded and skipped."""
    matrix.validate()
    splits = split_corpus(sentences)
    jobs = [(matrix, cell, seed, splits) for cell in matrix.cells for seed in matrix.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_job, jobs))
    else:
        runs = [_run_job(j) for j in jobs]
    return AblationResult(matrix, runs)
