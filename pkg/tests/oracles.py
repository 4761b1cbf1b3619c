"""Independent brute-force oracles.

Each oracle recomputes a quantity by the most direct method available
(per-example counting, exact rationals, high-precision arithmetic, full
scans) and deliberately shares no code with the implementation it
checks.
"""

from fractions import Fraction

import mpmath
import numpy as np


def expand_confusion_to_pairs(counts):
    """Turn a confusion grid back into explicit (gold, pred) examples."""
    pairs = []
    for g in range(counts.shape[0]):
        for p in range(counts.shape[1]):
            pairs.extend([(g, p)] * int(counts[g, p]))
    return pairs


def metrics_by_counting(pairs, num_classes):
    """Exact per-class metrics from raw example pairs, in rationals."""
    total = len(pairs)
    per_class = []
    for c in range(num_classes):
        tp = sum(1 for g, p in pairs if g == c and p == c)
        fp = sum(1 for g, p in pairs if g != c and p == c)
        fn = sum(1 for g, p in pairs if g == c and p != c)
        tn = total - tp - fp - fn
        support = tp + fn
        precision = Fraction(tp, tp + fp) if tp + fp else Fraction(0)
        recall = Fraction(tp, tp + fn) if tp + fn else Fraction(0)
        f1 = (
            2 * precision * recall / (precision + recall)
            if precision + recall
            else Fraction(0)
        )
        accuracy = Fraction(tp + tn, total) if total else Fraction(0)
        per_class.append(
            {
                "support": support,
                "precision": precision,
                "recall": recall,
                "f1": f1,
                "accuracy": accuracy,
            }
        )
    correct = sum(1 for g, p in pairs if g == p)
    overall = Fraction(correct, total) if total else Fraction(0)
    weighted_f1 = (
        sum(m["support"] * m["f1"] for m in per_class) / total if total else Fraction(0)
    )
    weighted_accuracy = (
        sum(m["support"] * m["accuracy"] for m in per_class) / total
        if total
        else Fraction(0)
    )
    return {
        "per_class": per_class,
        "overall_accuracy": overall,
        "weighted_f1": weighted_f1,
        "weighted_accuracy": weighted_accuracy,
    }


def haversine_mp(a, b, radius_km="6371.0"):
    """Great-circle distance at 50 significant digits via mpmath."""
    with mpmath.workdps(50):
        lat1, lon1 = mpmath.radians(mpmath.mpf(str(a[0]))), mpmath.radians(
            mpmath.mpf(str(a[1]))
        )
        lat2, lon2 = mpmath.radians(mpmath.mpf(str(b[0]))), mpmath.radians(
            mpmath.mpf(str(b[1]))
        )
        # central angle via the atan2 form (well-conditioned everywhere)
        dlon = lon2 - lon1
        y = mpmath.sqrt(
            (mpmath.cos(lat2) * mpmath.sin(dlon)) ** 2
            + (
                mpmath.cos(lat1) * mpmath.sin(lat2)
                - mpmath.sin(lat1) * mpmath.cos(lat2) * mpmath.cos(dlon)
            )
            ** 2
        )
        x = mpmath.sin(lat1) * mpmath.sin(lat2) + mpmath.cos(lat1) * mpmath.cos(
            lat2
        ) * mpmath.cos(dlon)
        angle = mpmath.atan2(y, x)
        return float(mpmath.mpf(radius_km) * angle)


def nearest_centroid_scan(point, centroids):
    """(id, (lat, lon)) of the nearest centroid; smallest id wins ties."""
    best = None
    for cid in sorted(centroids):
        dist = haversine_mp(point, centroids[cid])
        if best is None or dist < best[0] - 1e-12:
            best = (dist, cid)
    return best[1]


def scan_query(events, topic=None, time_from=None, time_to=None, neighbourhood=None, estate_only=False):
    """Reference predicate scan over a raw event list, in sequence order."""
    out = []
    for event in sorted(events, key=lambda e: e.pipeline_seq):
        if topic is not None and event.topic_label is not topic:
            continue
        if time_from is not None and event.post.created_at < time_from:
            continue
        if time_to is not None and event.post.created_at > time_to:
            continue
        if neighbourhood is not None and (
            event.location is None or event.location.neighbourhood_id != neighbourhood
        ):
            continue
        if estate_only and event.estate_label.value != 1:
            continue
        out.append(event)
    return out


def finite_difference_gradient(loss_fn, coords, step=1e-5):
    """Central differences of `loss_fn` along the given set/get coords.

    `coords` is a list of (getter, setter) pairs manipulating one scalar
    parameter each; returns the numeric partials in order.
    """
    grads = []
    for get, set_ in coords:
        original = get()
        set_(original + step)
        up = loss_fn()
        set_(original - step)
        down = loss_fn()
        set_(original)
        grads.append((up - down) / (2 * step))
    return np.array(grads)
