"""Entity-level precision / recall / F1 over exact (label, start, end) matches."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import EntitySpan
from .errors import DataError


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    # zero denominators report 0, never NaN
    p = tp / (tp + fp) if tp + fp else 0.0
    r = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * p * r / (p + r) if p + r else 0.0
    return p, r, f1


@dataclass
class LabelMetrics:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    @property
    def precision(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[2]


@dataclass
class Metrics:
    """Micro counts plus a per-label breakdown."""

    per_label: dict[str, LabelMetrics] = field(default_factory=dict)

    @property
    def tp(self) -> int:
        return sum(m.tp for m in self.per_label.values())

    @property
    def fp(self) -> int:
        return sum(m.fp for m in self.per_label.values())

    @property
    def fn(self) -> int:
        return sum(m.fn for m in self.per_label.values())

    @property
    def precision(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[0]

    @property
    def recall(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[1]

    @property
    def f1(self) -> float:
        return _prf(self.tp, self.fp, self.fn)[2]

    def as_dict(self) -> dict:
        return {
            "micro": {
                "tp": self.tp, "fp": self.fp, "fn": self.fn,
                "precision": self.precision, "recall": self.recall, "f1": self.f1,
            },
            "per_label": {
                lab: {
                    "tp": m.tp, "fp": m.fp, "fn": m.fn,
                    "precision": m.precision, "recall": m.recall, "f1": m.f1,
                }
                for lab, m in sorted(self.per_label.items())
            },
        }


def entity_f1(
    gold: Sequence[Sequence[EntitySpan]], pred: Sequence[Sequence[EntitySpan]]
) -> Metrics:
    """Score predictions sentence by sentence.

    A predicted span counts as a true positive iff the same sentence holds a
    gold span with identical label, start and end; each gold span can match
    at most one prediction (multiset intersection).
    """
    if len(gold) != len(pred):
        raise DataError(
            f"gold has {len(gold)} sentences but predictions have {len(pred)}"
        )
    metrics = Metrics()
    for gold_spans, pred_spans in zip(gold, pred):
        g = Counter((s.label, s.start, s.end) for s in gold_spans)
        p = Counter((s.label, s.start, s.end) for s in pred_spans)
        hits = g & p
        for key in g | p:
            lab = key[0]
            m = metrics.per_label.setdefault(lab, LabelMetrics())
            h = hits[key]
            m.tp += h
            m.fp += p[key] - h
            m.fn += g[key] - h
    return metrics


def format_table(metrics: Metrics) -> str:
    """Fixed-width report: one row per label plus the micro total."""
    rows = sorted(metrics.per_label.items())
    width = max([len("micro")] + [len(lab) for lab, _ in rows])
    header = (
        f"{'label':<{width}}  {'tp':>6} {'fp':>6} {'fn':>6} "
        f"{'prec':>7} {'recall':>7} {'f1':>7}"
    )
    lines = [header, "-" * len(header)]
    for lab, m in rows:
        lines.append(
            f"{lab:<{width}}  {m.tp:>6} {m.fp:>6} {m.fn:>6} "
            f"{m.precision:>7.4f} {m.recall:>7.4f} {m.f1:>7.4f}"
        )
    lines.append("-" * len(header))
    lines.append(
        f"{'micro':<{width}}  {metrics.tp:>6} {metrics.fp:>6} {metrics.fn:>6} "
        f"{metrics.precision:>7.4f} {metrics.recall:>7.4f} {metrics.f1:>7.4f}"
    )
    return "\n".join(lines)
