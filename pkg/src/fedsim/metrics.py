"""Binary-classification evaluation: cross-entropy, accuracy, ROC and AUC.

The ROC curve sweeps the distinct scores in descending order as
thresholds, and the trapezoidal area under it equals the tie-aware
pairwise ranking statistic (ties credited one half).  ``summarize``
condenses a federation run into best-round and per-client-best views.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .models import Dataset, ModelSpec, ParameterSet, bce_loss, forward

if TYPE_CHECKING:  # pragma: no cover
    from .orchestrator import RunReport


class UndefinedAUCError(ValueError):
    """AUC needs both classes present in the labels."""


@dataclass(frozen=True)
class MetricSet:
    loss: float
    accuracy: float
    auc: float
    n: int

    def __post_init__(self) -> None:
        if self.loss < 0:
            raise ValueError("loss must be >= 0")
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValueError("accuracy must lie in [0, 1]")
        if not (0.0 <= self.auc <= 1.0):
            raise ValueError("auc must lie in [0, 1]")
        if self.n < 1:
            raise ValueError("n must be >= 1")


@dataclass(frozen=True)
class RocCurve:
    """Operating points (fpr, tpr), from (0, 0) to (1, 1), both nondecreasing."""

    points: np.ndarray  # (k, 2) float64

    def __post_init__(self) -> None:
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
            raise ValueError("a ROC curve needs at least two (fpr, tpr) points")
        if tuple(pts[0]) != (0.0, 0.0) or tuple(pts[-1]) != (1.0, 1.0):
            raise ValueError("a ROC curve must run from (0, 0) to (1, 1)")
        if np.any(np.diff(pts[:, 0]) < 0) or np.any(np.diff(pts[:, 1]) < 0):
            raise ValueError("ROC coordinates must be nondecreasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def to_csv(self, path: str | Path) -> None:
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["fpr", "tpr"])
            for fpr, tpr in self.points:
                writer.writerow([repr(float(fpr)), repr(float(tpr))])


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> tuple[RocCurve, float]:
    """ROC curve and trapezoidal AUC over descending distinct-score thresholds."""
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel()
    if s.size != y.size or s.size == 0:
        raise ValueError("scores and labels must be nonempty and of equal length")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    y = y.astype(np.int64)
    n_pos = int(y.sum())
    n_neg = int(y.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC is undefined when only one class is present")
    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y[order]
    # Last index of each distinct-score group: one operating point per threshold.
    last = np.flatnonzero(np.append(s_sorted[:-1] != s_sorted[1:], True))
    tpr = np.cumsum(y_sorted)[last] / n_pos
    fpr = np.cumsum(1 - y_sorted)[last] / n_neg
    fpr = np.concatenate([[0.0], fpr])
    tpr = np.concatenate([[0.0], tpr])
    auc = float(np.sum((fpr[1:] - fpr[:-1]) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(np.column_stack([fpr, tpr])), auc


def evaluate(spec: ModelSpec, params: ParameterSet, dataset: Dataset) -> MetricSet:
    """Loss, accuracy and AUC of the model on ``dataset``.

    The decision rule maps p >= 0.5 to class 1.  Raises
    UndefinedAUCError when the dataset holds a single class.
    """
    if dataset.n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    p = forward(spec, params, dataset.features)
    _, auc = roc_auc(p, dataset.labels)
    return MetricSet(
        loss=bce_loss(p, dataset.labels),
        accuracy=float(np.mean((p >= 0.5) == (dataset.labels == 1))),
        auc=auc,
        n=dataset.n,
    )


def loss_accuracy(spec: ModelSpec, params: ParameterSet, dataset: Dataset) -> tuple[float, float]:
    """Loss and accuracy only; defined even for single-class datasets."""
    if dataset.n == 0:
        raise ValueError("cannot evaluate on an empty dataset")
    p = forward(spec, params, dataset.features)
    return bce_loss(p, dataset.labels), float(np.mean((p >= 0.5) == (dataset.labels == 1)))


@dataclass(frozen=True)
class RunSummary:
    """Best-round and per-client-best digest of a finished run.

    ``best_*`` pairs are (round index, value); ties go to the earliest
    round.  The client averages take each client's own best value across
    the rounds it was evaluated in, then average over clients; they are
    None when no per-client metrics were recorded.
    """

    rounds_completed: int
    total_sim_time_s: float
    final: MetricSet
    best_loss: tuple[int, float]
    best_accuracy: tuple[int, float]
    best_auc: tuple[int, float]
    client_avg_best_loss: float | None
    client_avg_best_accuracy: float | None


def summarize(report: "RunReport") -> RunSummary:
    """Digest of a RunReport (see RunSummary for the tie rules)."""
    rounds = report.rounds
    if not rounds:
        raise ValueError("cannot summarize a run with no completed rounds")
    best_loss = (rounds[0].round_index, rounds[0].global_metrics.loss)
    best_acc = (rounds[0].round_index, rounds[0].global_metrics.accuracy)
    best_auc = (rounds[0].round_index, rounds[0].global_metrics.auc)
    for rec in rounds[1:]:
        m = rec.global_metrics
        if m.loss < best_loss[1]:
            best_loss = (rec.round_index, m.loss)
        if m.accuracy > best_acc[1]:
            best_acc = (rec.round_index, m.accuracy)
        if m.auc > best_auc[1]:
            best_auc = (rec.round_index, m.auc)
    per_client_loss: dict[int, float] = {}
    per_client_acc: dict[int, float] = {}
    for rec in rounds:
        for ce in rec.client_metrics:
            if ce.client_id not in per_client_loss or ce.loss < per_client_loss[ce.client_id]:
                per_client_loss[ce.client_id] = ce.loss
            if ce.client_id not in per_client_acc or ce.accuracy > per_client_acc[ce.client_id]:
                per_client_acc[ce.client_id] = ce.accuracy
    avg_loss = avg_acc = None
    if per_client_loss:
        avg_loss = float(np.mean([per_client_loss[c] for c in sorted(per_client_loss)]))
        avg_acc = float(np.mean([per_client_acc[c] for c in sorted(per_client_acc)]))
    return RunSummary(
        rounds_completed=len(rounds),
        total_sim_time_s=report.total_sim_time_s,
        final=rounds[-1].global_metrics,
        best_loss=best_loss,
        best_accuracy=best_acc,
        best_auc=best_auc,
        client_avg_best_loss=avg_loss,
        client_avg_best_accuracy=avg_acc,
    )
