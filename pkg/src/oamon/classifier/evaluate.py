from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .model import ClassifierModel, TrainingExample, predict_topk


@dataclass
class EvaluationReport:
    precision_at: dict = field(default_factory=dict)
    recall_at: dict = field(default_factory=dict)
    n_test: int = 0

    def to_dict(self) -> dict:
        return {
            "n_test": self.n_test,
            "precision_at": {str(k): v for k, v in self.precision_at.items()},
            "recall_at": {str(k): v for k, v in self.recall_at.items()},
        }


def score_predictions(predicted: Sequence[Sequence[str]], gold: Sequence[Iterable[str]], ks=(1, 5)) -> EvaluationReport:
    """Micro-averaged P@k and R@k from ranked label lists.

    P@k = sum |top_k & gold| / (k * n), R@k = sum |top_k & gold| / sum |gold|.
    """
    if len(predicted) != len(gold):
        raise ValueError("predictions and gold differ in length")
    if not gold:
        raise ValueError("empty test set")
    gold_sets = [set(g) for g in gold]
    n_gold = sum(len(g) for g in gold_sets)
    report = EvaluationReport(n_test=len(gold_sets))
    for k in ks:
        hits = sum(len(set(p[:k]) & g) for p, g in zip(predicted, gold_sets))
        report.precision_at[k] = hits / (k * len(gold_sets))
        report.recall_at[k] = hits / n_gold if n_gold else 0.0
    return report


def evaluate(model: ClassifierModel, test_set: Sequence[TrainingExample], ks=(1, 5)) -> EvaluationReport:
    kmax = max(ks)
    predicted = [[p.label for p in predict_topk(model, ex.title, kmax)] for ex in test_set]
    return score_predictions(predicted, [ex.labels for ex in test_set], ks)


def train_test_split(examples: Sequence[TrainingExample], test_fraction: float = 0.2, seed: int = 0,
                     stratify: bool = False) -> tuple[list, list]:
    """Seeded random split. With ``stratify`` the split is done per first label."""
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must be in (0, 1)")
    rng = random.Random(seed)
    if not stratify:
        idx = list(range(len(examples)))
        rng.shuffle(idx)
        n_test = round(len(idx) * test_fraction)
        test = set(idx[:n_test])
        return ([ex for i, ex in enumerate(examples) if i not in test],
                [ex for i, ex in enumerate(examples) if i in test])
    strata: dict[str, list[int]] = {}
    for i, ex in enumerate(examples):
        strata.setdefault(ex.labels[0], []).append(i)
    test: set[int] = set()
    for label in sorted(strata):
        members = strata[label]
        rng.shuffle(members)
        test.update(members[: round(len(members) * test_fraction)])
    return ([ex for i, ex in enumerate(examples) if i not in test],
            [ex for i, ex in enumerate(examples) if i in test])


def read_corpus(path: str | Path) -> list[TrainingExample]:
    """TSV lines ``label1;label2 TAB title``."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            labels, sep, title = line.partition("\t")
            if not sep:
                raise ValueError(f"{path}:{lineno}: missing TAB")
            out.append(TrainingExample(title, tuple(l.strip() for l in labels.split(";") if l.strip())))
    return out


def write_corpus(examples: Iterable[TrainingExample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            fh.write(";".join(ex.labels) + "\t" + ex.title + "\n")
