"""Plain-text run reports.

A report is a sequence of sections. Key/value sections look like::

    [summary]
    accuracy = 0.8125
    best_epoch = 12

where every value is a JSON literal. Table sections carry CSV rows, the
first row being the header::

    [table:confusion]
    true\\pred,very_bad,bad,intermediate,good,very_good
    very_bad,3,1,0,0,0

Blank lines and lines starting with ``#`` are ignored.
"""
from __future__ import annotations

import csv
import io
import json

import numpy as np

from .errors import ValidationError
from .grading import GRADE_LABELS
from .metrics import EvalReport
from .training import TrainHistory


class Report:
    def __init__(self, title: str = ""):
        self.title = title
        self.sections: dict[str, dict] = {}
        self.tables: dict[str, list[list[str]]] = {}

    def add_section(self, name: str, values: dict):
        self.sections[name] = dict(values)

    def add_table(self, name: str, header, rows):
        self.tables[name] = [list(map(str, header))] + [list(map(str, r)) for r in rows]

    def to_text(self) -> str:
        out = io.StringIO()
        if self.title:
            out.write(f"# {self.title}\n")
        for name, values in self.sections.items():
            out.write(f"\n[{name}]\n")
            for k, v in values.items():
                out.write(f"{k} = {json.dumps(_plain(v))}\n")
        for name, rows in self.tables.items():
            out.write(f"\n[table:{name}]\n")
            csv.writer(out, lineterminator="\n").writerows(rows)
        return out.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "Report":
        rep = cls()
        current, is_table = None, False
        for lineno, line in enumerate(text.splitlines(), start=1):
            stripped = line.strip()
            if stripped.startswith("#") and current is None:
                rep.title = rep.title or stripped.lstrip("# ")
                continue
            if not stripped or stripped.startswith("#"):
                continue
            if stripped.startswith("[") and stripped.endswith("]"):
                name = stripped[1:-1]
                is_table = name.startswith("table:")
                current = name[len("table:"):] if is_table else name
                if is_table:
                    rep.tables[current] = []
                else:
                    rep.sections[current] = {}
                continue
            if current is None:
                raise ValidationError(f"report line {lineno}: content outside a section")
            if is_table:
                rep.tables[current].append(next(csv.reader([line])))
            else:
                key, sep, value = line.partition(" = ")
                if not sep:
                    raise ValidationError(f"report line {lineno}: expected 'key = value'")
                rep.sections[current][key.strip()] = json.loads(value)
        return rep

    def table(self, name: str) -> tuple[list[str], list[list[str]]]:
        rows = self.tables[name]
        return rows[0], rows[1:]


def _plain(v):
    if isinstance(v, np.generic):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, tuple):
        return list(v)
    return v


def history_report(history: TrainHistory, config: dict, extra: dict | None = None) -> Report:
    rep = Report("lqe training report")
    summary = {
        "epochs_run": history.stopped_epoch,
        "stopped_epoch": history.stopped_epoch,
        "early_stopped": history.early_stopped,
        "best_epoch": history.best_epoch,
        "best_val_loss": history.best_val_loss,
    }
    summary.update(extra or {})
    rep.add_section("summary", summary)
    rep.add_section("effective-config", config)
    rep.add_table("history", ["epoch", "train_loss", "val_loss"],
                  [(e + 1, repr(t), repr(v)) for e, (t, v) in
                   enumerate(zip(history.train_loss, history.val_loss))])
    return rep


def eval_report(report: EvalReport, config: dict, title: str = "lqe evaluation report") -> Report:
    rep = Report(title)
    rep.add_section("summary", report.summary())
    rep.add_section("effective-config", config)
    rep.add_table("confusion", ["true\\pred", *GRADE_LABELS],
                  [(GRADE_LABELS[i], *map(int, row)) for i, row in enumerate(report.confusion)])
    support = report.confusion.sum(axis=1)
    rep.add_table("per_class", ["grade", "support", "f1"],
                  [(GRADE_LABELS[i], int(support[i]), repr(float(f))) for i, f in enumerate(report.f1_per_class)])
    return rep


def confusion_from_report(rep: Report) -> np.ndarray:
    header, rows = rep.table("confusion")
    if header[1:] != list(GRADE_LABELS):
        raise ValidationError("confusion table has unexpected columns")
    return np.array([[int(c) for c in r[1:]] for r in rows], dtype=np.int64)
