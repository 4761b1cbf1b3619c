"""Gazetteer-backed location inference for posts without geotags.

A deliberately simple, fully reproducible baseline: candidate POIs come
from an inverted index over POI name tokens, scored by IDF overlap plus
a smoothed day-of-week x hour-of-day usage prior.  The module keeps the
same interface and metrics a stronger model would use, so one can be
slotted in without touching callers.
"""

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import SchemaError, ValidationError
from .text import tokenize
from .types import GeoPoint, Granularity, Post, ResolvedLocation, parse_timestamp

EARTH_RADIUS_KM = 6371.0
TEMPORAL_WEIGHT = 1.0  # beta: weight of the log-prior bonus
SCORE_THRESHOLD = 2.0  # theta: minimum score to resolve at all
PRIOR_CELLS = 168  # 7 days x 24 hours

POI_FILE = "pois.csv"
NEIGHBOURHOOD_FILE = "neighbourhoods.csv"
HISTORY_FILE = "history.csv"


@dataclass(frozen=True)
class PointOfInterest:
    poi_id: str
    name: str
    name_tokens: tuple[str, ...]
    latitude: float
    longitude: float
    neighbourhood_id: str


@dataclass(frozen=True)
class Neighbourhood:
    neighbourhood_id: str
    name: str
    centroid: GeoPoint


@dataclass(frozen=True)
class Gazetteer:
    pois: dict[str, PointOfInterest]
    neighbourhoods: dict[str, Neighbourhood]
    token_index: dict[str, frozenset[str]]  # token -> poi_ids
    idf: dict[str, float]
    temporal_prior: dict[str, np.ndarray]  # poi_id -> (7, 24), sums to 1

    def __len__(self) -> int:
        return len(self.pois)


@dataclass(frozen=True)
class GeolocationResult:
    resolved: Optional[ResolvedLocation]
    candidates_considered: int


def _point(value) -> tuple[float, float]:
    if isinstance(value, GeoPoint):
        return value.latitude, value.longitude
    lat, lon = value
    return float(lat), float(lon)


def haversine_km(a, b) -> float:
    """Great-circle distance in km between two (lat, lon) points."""
    lat1, lon1 = _point(a)
    lat2, lon2 = _point(b)
    GeoPoint(lat1, lon1)  # range validation
    GeoPoint(lat2, lon2)
    phi1, phi2 = math.radians(lat1), math.radians(lat2)
    dphi = math.radians(lat2 - lat1)
    dlam = math.radians(lon2 - lon1)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(min(1.0, math.sqrt(h)))


def _read_rows(path, required: tuple[str, ...]) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [col for col in required if col not in header]
        if missing:
            raise SchemaError(f"{path}: missing columns {missing}")
        return list(reader)


def build_gazetteer(poi_file, neighbourhood_file, history=None) -> Gazetteer:
    """Load the POI catalog and derive the matching indexes.

    `history` is an optional iterable of (poi_id, timestamp) pairs or a
    path to a `poi_id,timestamp` CSV.  Priors use add-one smoothing over
    the 168 day x hour cells, so an absent history means uniform 1/168.
    History rows naming unknown POIs are ignored (observational data may
    lag the catalog); anything unparseable is a schema error.
    """
    neighbourhoods: dict[str, Neighbourhood] = {}
    for row_no, row in enumerate(
        _read_rows(
            neighbourhood_file,
            ("neighbourhood_id", "name", "centroid_lat", "centroid_lon"),
        ),
        start=2,
    ):
        try:
            nb = Neighbourhood(
                neighbourhood_id=row["neighbourhood_id"].strip(),
                name=row["name"].strip(),
                centroid=GeoPoint(
                    float(row["centroid_lat"]), float(row["centroid_lon"])
                ),
            )
        except (ValueError, ValidationError) as exc:
            raise SchemaError(f"{neighbourhood_file} row {row_no}: {exc}") from None
        if not nb.neighbourhood_id:
            raise SchemaError(f"{neighbourhood_file} row {row_no}: empty id")
        neighbourhoods[nb.neighbourhood_id] = nb

    pois: dict[str, PointOfInterest] = {}
    for row_no, row in enumerate(
        _read_rows(poi_file, ("poi_id", "name", "lat", "lon", "neighbourhood_id")),
        start=2,
    ):
        poi_id = row["poi_id"].strip()
        nb_id = row["neighbourhood_id"].strip()
        if nb_id not in neighbourhoods:
            raise SchemaError(
                f"{poi_file} row {row_no}: poi {poi_id!r} references "
                f"unknown neighbourhood {nb_id!r}"
            )
        try:
            poi = PointOfInterest(
                poi_id=poi_id,
                name=row["name"].strip(),
                name_tokens=tuple(tokenize(row["name"])),
                latitude=float(row["lat"]),
                longitude=float(row["lon"]),
                neighbourhood_id=nb_id,
            )
            GeoPoint(poi.latitude, poi.longitude)
        except (ValueError, ValidationError) as exc:
            raise SchemaError(f"{poi_file} row {row_no}: {exc}") from None
        if not poi_id:
            raise SchemaError(f"{poi_file} row {row_no}: empty poi_id")
        pois[poi_id] = poi

    index: dict[str, set[str]] = {}
    for poi in pois.values():
        for token in set(poi.name_tokens):
            index.setdefault(token, set()).add(poi.poi_id)
    token_index = {tok: frozenset(ids) for tok, ids in index.items()}
    n = len(pois)
    idf = {
        tok: math.log((1.0 + n) / (1.0 + len(ids))) + 1.0
        for tok, ids in token_index.items()
    }

    counts = {poi_id: np.zeros((7, 24)) for poi_id in pois}
    if history is not None:
        for poi_id, dt in _iter_history(history):
            if poi_id not in counts:
                continue
            counts[poi_id][dt.weekday(), dt.hour] += 1.0
    temporal_prior = {
        poi_id: (grid + 1.0) / (grid.sum() + PRIOR_CELLS)
        for poi_id, grid in counts.items()
    }

    return Gazetteer(
        pois=pois,
        neighbourhoods=neighbourhoods,
        token_index=token_index,
        idf=idf,
        temporal_prior=temporal_prior,
    )


def _iter_history(history):
    if isinstance(history, (str, bytes)) or hasattr(history, "__fspath__"):
        rows = _read_rows(history, ("poi_id", "timestamp"))
        for row_no, row in enumerate(rows, start=2):
            try:
                yield row["poi_id"].strip(), parse_timestamp(row["timestamp"])
            except ValidationError as exc:
                raise SchemaError(f"{history} row {row_no}: {exc}") from None
    else:
        for poi_id, stamp in history:
            yield poi_id, stamp if not isinstance(stamp, str) else parse_timestamp(stamp)


def load_gazetteer_dir(directory) -> Gazetteer:
    """Build a gazetteer from a directory holding the standard CSV files."""
    import os

    poi_file = os.path.join(directory, POI_FILE)
    nb_file = os.path.join(directory, NEIGHBOURHOOD_FILE)
    history_file = os.path.join(directory, HISTORY_FILE)
    return build_gazetteer(
        poi_file,
        nb_file,
        history=history_file if os.path.exists(history_file) else None,
    )


def _candidate_scores(post: Post, gaz: Gazetteer) -> dict[str, float]:
    """Score every POI sharing at least one name token with the post."""
    tokens = set(post.tokens)
    candidates: set[str] = set()
    for token in tokens:
        candidates |= gaz.token_index.get(token, frozenset())
    dow, hour = post.created_at.weekday(), post.created_at.hour
    scores: dict[str, float] = {}
    for poi_id in candidates:
        poi = gaz.pois[poi_id]
        shared = tokens.intersection(poi.name_tokens)
        base = sum(gaz.idf[token] for token in shared)
        prior = gaz.temporal_prior[poi_id][dow, hour]
        scores[poi_id] = base + TEMPORAL_WEIGHT * math.log(prior * PRIOR_CELLS)
    return scores


def geolocate(
    post: Post, gaz: Gazetteer, granularity: Granularity = Granularity.POI
) -> GeolocationResult:
    """Infer the posting location, or return unresolved below threshold."""
    if not gaz.pois:
        raise ValidationError("gazetteer is empty")
    scores = _candidate_scores(post, gaz)
    if not scores:
        return GeolocationResult(resolved=None, candidates_considered=0)

    if granularity is Granularity.POI:
        winner = min(scores, key=lambda pid: (-scores[pid], pid))
        if scores[winner] < SCORE_THRESHOLD:
            return GeolocationResult(None, len(scores))
        positive = sum(s for s in scores.values() if s > 0.0)
        poi = gaz.pois[winner]
        resolved = ResolvedLocation(
            granularity=Granularity.POI,
            poi_id=poi.poi_id,
            neighbourhood_id=poi.neighbourhood_id,
            latitude=poi.latitude,
            longitude=poi.longitude,
            confidence=_confidence(scores[winner], positive),
        )
        return GeolocationResult(resolved, len(scores))

    by_neighbourhood: dict[str, float] = {}
    for poi_id, score in scores.items():
        nb_id = gaz.pois[poi_id].neighbourhood_id
        by_neighbourhood[nb_id] = by_neighbourhood.get(nb_id, 0.0) + score
    winner = min(by_neighbourhood, key=lambda nid: (-by_neighbourhood[nid], nid))
    if by_neighbourhood[winner] < SCORE_THRESHOLD:
        return GeolocationResult(None, len(scores))
    positive = sum(s for s in by_neighbourhood.values() if s > 0.0)
    nb = gaz.neighbourhoods[winner]
    resolved = ResolvedLocation(
        granularity=Granularity.NEIGHBOURHOOD,
        neighbourhood_id=nb.neighbourhood_id,
        latitude=nb.centroid.latitude,
        longitude=nb.centroid.longitude,
        confidence=_confidence(by_neighbourhood[winner], positive),
    )
    return GeolocationResult(resolved, len(scores))


def _confidence(winner_score: float, positive_total: float) -> float:
    if positive_total <= 0.0:
        return 0.0
    return min(1.0, max(0.0, winner_score / positive_total))


def coarsen_to_neighbourhood(point, gaz: Gazetteer) -> ResolvedLocation:
    """Snap a coordinate to the nearest neighbourhood centroid."""
    if not gaz.neighbourhoods:
        raise ValidationError("gazetteer has no neighbourhoods")
    lat, lon = _point(point)
    nearest = min(
        gaz.neighbourhoods.values(),
        key=lambda nb: (haversine_km((lat, lon), nb.centroid), nb.neighbourhood_id),
    )
    return ResolvedLocation(
        granularity=Granularity.NEIGHBOURHOOD,
        neighbourhood_id=nearest.neighbourhood_id,
        latitude=nearest.centroid.latitude,
        longitude=nearest.centroid.longitude,
        confidence=1.0,
    )
