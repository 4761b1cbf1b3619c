"""Evaluation metrics: confusion matrices, per-class P/R/F1 with weighted
averages, and geolocation distance error.

Conventions, applied everywhere: 0/0 ratios are defined as 0; per-class
accuracy means one-vs-rest accuracy; weighted averages weight by gold
support.  Report rendering is byte-stable for identical inputs.
"""

import io
import json
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .geolocation import GeolocationResult, haversine_km
from .types import (
    TOPIC_NAMES,
    GeoPoint,
    Granularity,
    ResolvedLocation,
    to_canonical_json,
    topic_from_name,
)

ESTATE_CLASS_NAMES = ("Not Estate", "Estate")


class EvaluationTask(Enum):
    ESTATE_DETECTION = "estate"
    TOPIC_CLASSIFICATION = "topic"
    GEOLOCATION = "geo"


class ReportFormat(Enum):
    TEXT = "text"
    CSV = "csv"
    JSON = "json"


@dataclass(frozen=True)
class ConfusionMatrix:
    """Rows are gold labels, columns are predictions."""

    num_classes: int
    counts: np.ndarray  # (num_classes, num_classes) non-negative ints

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValidationError("confusion matrix needs at least 2 classes")
        if self.counts.shape != (self.num_classes, self.num_classes):
            raise ValidationError("counts grid does not match num_classes")
        if (self.counts < 0).any():
            raise ValidationError("counts must be non-negative")

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassMetrics:
    name: str
    support: int
    precision: float
    recall: float
    f1: float
    accuracy: float  # one-vs-rest


@dataclass(frozen=True)
class EvaluationReport:
    task: EvaluationTask
    per_class: tuple[ClassMetrics, ...]
    overall_accuracy: float
    weighted_f1: float
    weighted_accuracy: float
    mean_distance_km: Optional[float] = None
    resolved_fraction: Optional[float] = None
    empty: bool = False


def confusion(
    gold: Sequence[int], pred: Sequence[int], num_classes: int
) -> ConfusionMatrix:
    """Count gold/prediction pairs into a num_classes^2 grid."""
    if len(gold) != len(pred):
        raise ValidationError(
            f"gold and pred lengths differ: {len(gold)} vs {len(pred)}"
        )
    counts = np.zeros((num_classes, num_classes), dtype=np.int64)
    for g, p in zip(gold, pred):
        if not (0 <= g < num_classes and 0 <= p < num_classes):
            raise ValidationError(f"label out of range: gold={g} pred={p}")
        counts[g, p] += 1
    return ConfusionMatrix(num_classes=num_classes, counts=counts)


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def metrics_from_confusion(
    cm: ConfusionMatrix,
    task: EvaluationTask = EvaluationTask.TOPIC_CLASSIFICATION,
    class_names: Optional[Sequence[str]] = None,
) -> EvaluationReport:
    """Derive per-class and weighted metrics from a confusion matrix."""
    if class_names is None:
        if task is EvaluationTask.ESTATE_DETECTION and cm.num_classes == 2:
            class_names = ESTATE_CLASS_NAMES
        elif task is EvaluationTask.TOPIC_CLASSIFICATION and cm.num_classes == len(
            TOPIC_NAMES
        ):
            class_names = TOPIC_NAMES
        else:
            class_names = tuple(str(i) for i in range(cm.num_classes))
    if len(class_names) != cm.num_classes:
        raise ValidationError("class_names length must match num_classes")

    total = cm.total
    per_class = []
    for c in range(cm.num_classes):
        tp = int(cm.counts[c, c])
        gold_support = int(cm.counts[c, :].sum())
        pred_support = int(cm.counts[:, c].sum())
        tn = total - gold_support - pred_support + tp
        precision = _safe_div(tp, pred_support)
        recall = _safe_div(tp, gold_support)
        f1 = _safe_div(2.0 * precision * recall, precision + recall)
        per_class.append(
            ClassMetrics(
                name=class_names[c],
                support=gold_support,
                precision=precision,
                recall=recall,
                f1=f1,
                accuracy=_safe_div(tp + tn, total),
            )
        )

    overall = _safe_div(float(np.trace(cm.counts)), total)
    weighted_f1 = _safe_div(
        sum(m.support * m.f1 for m in per_class), total
    )
    weighted_accuracy = _safe_div(
        sum(m.support * m.accuracy for m in per_class), total
    )
    return EvaluationReport(
        task=task,
        per_class=tuple(per_class),
        overall_accuracy=overall,
        weighted_f1=weighted_f1,
        weighted_accuracy=weighted_accuracy,
        empty=total == 0,
    )


@dataclass(frozen=True)
class GoldLocation:
    point: GeoPoint
    location_id: Optional[str] = None


@dataclass(frozen=True)
class GeolocationError:
    """Aggregate geolocation quality; `empty` flags a no-data evaluation."""

    mean_distance_km: Optional[float]
    resolved_fraction: float
    accuracy: Optional[float]
    empty: bool = False


def geolocation_error(
    gold: dict[str, GoldLocation], results: dict[str, GeolocationResult]
) -> GeolocationError:
    """Mean great-circle error over resolved posts, plus resolution stats.

    Unresolved posts are excluded from the distance mean but count as
    incorrect for accuracy.  Accuracy compares predicted ids with gold
    ids at the result's own granularity and is only reported when gold
    ids are present.
    """
    if not results:
        return GeolocationError(None, 0.0, None, empty=True)
    missing = [pid for pid in results if pid not in gold]
    if missing:
        raise ValidationError(f"results reference posts without gold: {missing[:5]}")

    distances = []
    id_total = id_correct = 0
    resolved_count = 0
    for post_id, result in results.items():
        entry = gold[post_id]
        if entry.location_id is not None:
            id_total += 1
        if result.resolved is None:
            continue
        resolved_count += 1
        loc = result.resolved
        distances.append(haversine_km(entry.point, (loc.latitude, loc.longitude)))
        if entry.location_id is not None:
            predicted = loc.poi_id if loc.poi_id is not None else loc.neighbourhood_id
            if predicted == entry.location_id:
                id_correct += 1

    return GeolocationError(
        mean_distance_km=float(np.mean(distances)) if distances else None,
        resolved_fraction=resolved_count / len(results),
        accuracy=(id_correct / id_total) if id_total else None,
    )


def geolocation_report(error: GeolocationError) -> EvaluationReport:
    """Wrap geolocation aggregates in the common report shape."""
    return EvaluationReport(
        task=EvaluationTask.GEOLOCATION,
        per_class=(),
        overall_accuracy=error.accuracy or 0.0,
        weighted_f1=0.0,
        weighted_accuracy=0.0,
        mean_distance_km=error.mean_distance_km,
        resolved_fraction=error.resolved_fraction,
        empty=error.empty,
    )


# --- rendering ------------------------------------------------------------

WEIGHTED_AVG_LABEL = "Weighted Avg"


def report_to_obj(report: EvaluationReport) -> dict:
    return {
        "task": report.task.value,
        "per_class": [
            {
                "class": m.name,
                "support": m.support,
                "precision": m.precision,
                "recall": m.recall,
                "f1": m.f1,
                "accuracy": m.accuracy,
            }
            for m in report.per_class
        ],
        "overall_accuracy": report.overall_accuracy,
        "weighted_f1": report.weighted_f1,
        "weighted_accuracy": report.weighted_accuracy,
        "mean_distance_km": report.mean_distance_km,
        "resolved_fraction": report.resolved_fraction,
        "empty": report.empty,
    }


def render_report(report: EvaluationReport, fmt: ReportFormat) -> bytes:
    if fmt is ReportFormat.JSON:
        return (to_canonical_json(report_to_obj(report)) + "\n").encode("utf-8")
    if fmt is ReportFormat.CSV:
        return _render_csv(report)
    return _render_text(report)


def _render_csv(report: EvaluationReport) -> bytes:
    out = io.StringIO()
    if report.task is EvaluationTask.GEOLOCATION:
        out.write("metric,value\n")
        out.write(f"mean_distance_km,{_num(report.mean_distance_km)}\n")
        out.write(f"resolved_fraction,{_num(report.resolved_fraction)}\n")
        out.write(f"accuracy,{_num(report.overall_accuracy)}\n")
    else:
        out.write("class,accuracy,f1\n")
        for m in report.per_class:
            out.write(f"{m.name},{m.accuracy:.3f},{m.f1:.3f}\n")
        out.write(
            f"{WEIGHTED_AVG_LABEL},{report.weighted_accuracy:.3f},"
            f"{report.weighted_f1:.3f}\n"
        )
    return out.getvalue().encode("utf-8")


def _render_text(report: EvaluationReport) -> bytes:
    out = io.StringIO()
    if report.task is EvaluationTask.GEOLOCATION:
        out.write("Geolocation\n")
        out.write(f"Mean distance error (km): {_num(report.mean_distance_km)}\n")
        out.write(f"Resolved fraction: {_num(report.resolved_fraction)}\n")
        out.write(f"Accuracy: {_num(report.overall_accuracy)}\n")
    else:
        title = (
            "Estate-related Post Classification"
            if report.task is EvaluationTask.ESTATE_DETECTION
            else "Estate Topic Classification"
        )
        out.write(title + "\n")
        width = max(
            [len(WEIGHTED_AVG_LABEL)] + [len(m.name) for m in report.per_class]
        )
        out.write(f"{'':<{width}}  Accuracy  F1-score\n")
        for m in report.per_class:
            out.write(f"{m.name:<{width}}  {m.accuracy:>8.3f}  {m.f1:>8.3f}\n")
        out.write(
            f"{WEIGHTED_AVG_LABEL:<{width}}  {report.weighted_accuracy:>8.3f}  "
            f"{report.weighted_f1:>8.3f}\n"
        )
        out.write(f"Overall accuracy: {report.overall_accuracy:.3f}\n")
    if report.empty:
        out.write("(empty evaluation: no examples)\n")
    return out.getvalue().encode("utf-8")


def _num(value: Optional[float]) -> str:
    return "n/a" if value is None else f"{value:.3f}"


# --- gold/pred label files --------------------------------------------------
#
# Newline-delimited JSON keyed by post_id.  Estate labels are 0/1
# integers, topic labels travel by name, geolocation entries carry
# lat/lon plus an optional location_id.  Predictions for geolocation may
# be {"post_id": ..., "resolved": false} for unresolved posts.


def _iter_ndjson(path):
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except ValueError as exc:
                raise ValidationError(f"{path} line {line_no}: {exc}") from None
            if not isinstance(obj, dict) or "post_id" not in obj:
                raise ValidationError(f"{path} line {line_no}: missing post_id")
            yield line_no, obj


def load_label_file(path, task: EvaluationTask) -> dict[str, int]:
    """Read an estate or topic label file into post_id -> class index."""
    if task is EvaluationTask.GEOLOCATION:
        raise ValidationError("use load_geo_gold_file/load_geo_pred_file for geo")
    labels: dict[str, int] = {}
    for line_no, obj in _iter_ndjson(path):
        value = obj.get("label")
        if task is EvaluationTask.ESTATE_DETECTION:
            if value not in (0, 1):
                raise ValidationError(
                    f"{path} line {line_no}: estate label must be 0 or 1"
                )
            labels[obj["post_id"]] = int(value)
        else:
            labels[obj["post_id"]] = topic_from_name(str(value)).value
    return labels


def load_geo_gold_file(path) -> dict[str, GoldLocation]:
    gold: dict[str, GoldLocation] = {}
    for line_no, obj in _iter_ndjson(path):
        try:
            point = GeoPoint(float(obj["lat"]), float(obj["lon"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path} line {line_no}: {exc}") from None
        location_id = obj.get("location_id")
        gold[obj["post_id"]] = GoldLocation(
            point=point, location_id=None if location_id is None else str(location_id)
        )
    return gold


def load_geo_pred_file(path) -> dict[str, GeolocationResult]:
    preds: dict[str, GeolocationResult] = {}
    for line_no, obj in _iter_ndjson(path):
        if not obj.get("resolved", True):
            preds[obj["post_id"]] = GeolocationResult(None, 0)
            continue
        try:
            granularity = Granularity(obj.get("granularity", "POI"))
            resolved = ResolvedLocation(
                granularity=granularity,
                poi_id=obj.get("location_id")
                if granularity is Granularity.POI
                else None,
                neighbourhood_id=str(
                    obj.get("neighbourhood_id") or obj.get("location_id") or "?"
                ),
                latitude=float(obj["lat"]),
                longitude=float(obj["lon"]),
                confidence=float(obj.get("confidence", 1.0)),
            )
        except (KeyError, TypeError, ValueError, ValidationError) as exc:
            raise ValidationError(f"{path} line {line_no}: {exc}") from None
        preds[obj["post_id"]] = GeolocationResult(resolved, 0)
    return preds


def evaluate_labels(
    gold: dict[str, int], pred: dict[str, int], task: EvaluationTask
) -> EvaluationReport:
    """Confusion-based report over the post_ids present in both maps."""
    shared = sorted(set(gold) & set(pred))
    num_classes = 2 if task is EvaluationTask.ESTATE_DETECTION else len(TOPIC_NAMES)
    cm = confusion(
        [gold[pid] for pid in shared], [pred[pid] for pid in shared], num_classes
    )
    return metrics_from_confusion(cm, task=task)
