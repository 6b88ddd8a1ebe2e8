"""Prediction, accuracy, round selection, and the three report metrics:
per-client personalization, held-out-domain generalization, and their
comprehensive average."""

from __future__ import annotations

import csv
import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from .adapter import AdapterParams, forward
from .errors import ParameterError, ShapeError
from .loss import DEFAULT_SCALE
from .numerics import as_matrix, rowwise_l2_normalize

ZERO_SHOT = None  # adapter value meaning "classify on the raw features"


def predict(adapter: AdapterParams | None, features, class_text_features,
            s: float = DEFAULT_SCALE) -> np.ndarray:
    """Argmax class per sample by cosine similarity between the (adapted or
    raw) image feature and each class text feature. Ties go to the lowest
    class index."""
    x = as_matrix(features, "features")
    text = as_matrix(class_text_features, "class text features")
    if x.shape[1] != text.shape[1]:
        raise ShapeError(
            f"features have dim {x.shape[1]}, class table has dim {text.shape[1]}")
    if adapter is None:
        u = x
    else:
        u = forward(adapter, x).adapted
    logits = s * (rowwise_l2_normalize(u) @ rowwise_l2_normalize(text).T)
    return np.argmax(logits, axis=1)


def accuracy(pred, truth) -> float:
    """Fraction of exact matches."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ParameterError(f"length mismatch: {pred.shape} vs {truth.shape}")
    if pred.size == 0:
        raise ParameterError("cannot compute accuracy of an empty prediction list")
    return float(np.mean(pred == truth))


def select_best_round(history) -> int:
    """Index of the round with the best mean validation accuracy; ties go to
    the earlier round."""
    if not history:
        raise ParameterError("round history is empty")
    best_idx = 0
    best_acc = history[0].mean_val_accuracy
    for i, report in enumerate(history[1:], start=1):
        if report.mean_val_accuracy > best_acc:
            best_idx = i
            best_acc = report.mean_val_accuracy
    return best_idx


@dataclass(frozen=True)
class EvalReport:
    """Final metrics of one trained run at its selected round."""

    task: str                              # target domain name, "" if none
    algorithm: str
    seed: int
    best_round: int                        # -1 when no training round ran
    client_names: tuple[str, ...]
    personalization: tuple[float, ...]     # test-split accuracy per client
    generalization: float | None           # accuracy on the full target
    comprehensive: float                   # mean of generalization + personalization

    @property
    def mean_personalization(self) -> float:
        return float(np.mean(self.personalization))


def comprehensive_average(generalization: float | None,
                          personalization) -> float:
    """Unweighted mean of the target's accuracy and every participant's test
    accuracy; participants only when there is no target."""
    values = list(personalization)
    if generalization is not None:
        values = [generalization] + values
    if not values:
        raise ParameterError("nothing to average")
    return float(np.mean(values))


def evaluate_run(run, clients, target=None) -> EvalReport:
    """Score a finished run: each participant's test split with the model it
    ended up with, plus the full target dataset when one is present."""
    personalization = []
    for client, adapter in zip(clients, run.client_models(clients)):
        ds = client.dataset
        idx = client.split.test
        pred = predict(adapter, ds.features[idx], ds.class_text_features, run.scale)
        personalization.append(accuracy(pred, ds.labels[idx]))

    generalization = None
    if target is not None:
        gen_values = []
        for adapter in run.generalization_models():
            pred = predict(adapter, target.features, target.class_text_features,
                           run.scale)
            gen_values.append(accuracy(pred, target.labels))
        generalization = float(np.mean(gen_values))

    return EvalReport(
        task=target.domain_name if target is not None else "",
        algorithm=run.algorithm,
        seed=run.seed,
        best_round=run.best_round,
        client_names=tuple(c.name for c in clients),
        personalization=tuple(personalization),
        generalization=generalization,
        comprehensive=comprehensive_average(generalization, personalization),
    )


# ---------------------------------------------------------------------------
# report serialization (CSV + JSON); the CLI's machine-readable surface

CSV_HEADER = ["task", "seed", "metric_type", "name", "accuracy"]


def report_rows(report: EvalReport) -> list[list]:
    rows = []
    for name, acc in zip(report.client_names, report.personalization):
        rows.append([report.task, report.seed, "personalization", name, repr(acc)])
    if report.generalization is not None:
        rows.append([report.task, report.seed, "generalization", report.task,
                     repr(report.generalization)])
    rows.append([report.task, report.seed, "comprehensive", "all",
                 repr(report.comprehensive)])
    return rows


def mean_rows(reports: list[EvalReport]) -> list[list]:
    """Seed-mean rows; seed column says "mean"."""
    first = reports[0]
    rows = []
    for i, name in enumerate(first.client_names):
        acc = float(np.mean([r.personalization[i] for r in reports]))
        rows.append([first.task, "mean", "personalization", name, repr(acc)])
    if first.generalization is not None:
        acc = float(np.mean([r.generalization for r in reports]))
        rows.append([first.task, "mean", "generalization", first.task, repr(acc)])
    acc = float(np.mean([r.comprehensive for r in reports]))
    rows.append([first.task, "mean", "comprehensive", "all", repr(acc)])
    return rows


def _atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_reports_csv(path, reports: list[EvalReport], include_mean: bool = True) -> None:
    import io

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for report in reports:
        writer.writerows(report_rows(report))
    if include_mean and reports:
        writer.writerows(mean_rows(reports))
    _atomic_write_text(path, buf.getvalue())


def report_payload(report: EvalReport) -> dict:
    return {
        "task": report.task,
        "algorithm": report.algorithm,
        "seed": report.seed,
        "best_round": report.best_round,
        "personalization": {
            name: acc for name, acc in
            zip(report.client_names, report.personalization)
        },
        "generalization": report.generalization,
        "comprehensive": report.comprehensive,
    }


def summary_payload(reports: list[EvalReport], ledger=None) -> dict:
    first = reports[0]
    payload = {
        "task": first.task,
        "algorithm": first.algorithm,
        "seeds": [r.seed for r in reports],
        "per_seed": [report_payload(r) for r in reports],
        "mean": {
            "personalization": {
                name: float(np.mean([r.personalization[i] for r in reports]))
                for i, name in enumerate(first.client_names)
            },
            "generalization": (
                float(np.mean([r.generalization for r in reports]))
                if first.generalization is not None else None
            ),
            "comprehensive": float(np.mean([r.comprehensive for r in reports])),
        },
    }
    if ledger is not None:
        payload["ledger"] = ledger.as_dict()
    return payload


def write_json(path, payload: dict) -> None:
    _atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")
