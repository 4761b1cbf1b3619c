import json
from datetime import datetime, timezone

import numpy as np
import pytest

from conftest import make_post
from estatewatch.errors import ValidationError
from estatewatch.types import (
    ClassifiedEvent,
    Corpus,
    EstateLabel,
    GeoPoint,
    Granularity,
    Post,
    ResolvedLocation,
    TopicLabel,
    argmax_first,
    event_from_line,
    event_to_line,
    parse_timestamp,
    topic_from_name,
    topic_name,
    validate_corpus,
)


class TestTopicNames:
    def test_fixed_mapping(self):
        assert topic_name(TopicLabel(0)) == "Infrastructure"
        assert topic_name(TopicLabel(1)) == "Parking"
        assert topic_name(TopicLabel(2)) == "Noise"
        assert topic_name(TopicLabel(3)) == "Others"

    def test_round_trip(self):
        for label in TopicLabel:
            assert topic_from_name(topic_name(label)) is label

    def test_unknown_name_lists_valid_ones(self):
        with pytest.raises(ValidationError, match="Infrastructure"):
            topic_from_name("Gardening")


class TestArgmax:
    def test_tie_breaks_to_smallest_index(self):
        assert argmax_first([0.5, 0.5]) == 0
        assert argmax_first([0.1, 0.4, 0.4, 0.1]) == 1

    def test_matches_numpy_on_random_vectors(self, rng):
        for _ in range(1000):
            scores = rng.random(4)
            # induce frequent exact ties
            scores = np.round(scores, 1)
            assert argmax_first(scores.tolist()) == int(np.argmax(scores))


class TestPostInvariants:
    def test_empty_id_rejected(self):
        with pytest.raises(ValidationError):
            make_post("", "text here")

    def test_naive_timestamp_rejected(self):
        with pytest.raises(ValidationError):
            Post(
                post_id="x",
                author_pseudonym="anon",
                text="hi",
                tokens=("hi",),
                created_at=datetime(2024, 1, 1),
            )

    def test_geotag_ranges(self):
        with pytest.raises(ValidationError):
            GeoPoint(91.0, 0.0)
        with pytest.raises(ValidationError):
            GeoPoint(0.0, -180.5)
        GeoPoint(90.0, 180.0)  # boundary values are legal


class TestEventInvariants:
    def test_topic_requires_estate(self):
        post = make_post("a", "hello")
        with pytest.raises(ValidationError):
            ClassifiedEvent(
                post=post,
                estate_label=EstateLabel.NOT_ESTATE,
                estate_score=0.2,
                topic_label=TopicLabel.NOISE,
                topic_scores=(0.0, 0.0, 1.0, 0.0),
            )

    def test_estate_requires_topic(self):
        post = make_post("a", "hello")
        with pytest.raises(ValidationError):
            ClassifiedEvent(post=post, estate_label=EstateLabel.ESTATE, estate_score=0.9)

    def test_topic_label_must_match_argmax(self):
        post = make_post("a", "hello")
        with pytest.raises(ValidationError):
            ClassifiedEvent(
                post=post,
                estate_label=EstateLabel.ESTATE,
                estate_score=0.9,
                topic_label=TopicLabel.OTHERS,
                topic_scores=(0.7, 0.1, 0.1, 0.1),
            )

    def test_argmax_tie_break_enforced_on_random_vectors(self, rng):
        post = make_post("a", "hello")
        for _ in range(1000):
            scores = rng.random(4)
            scores = np.round(scores / scores.sum(), 6)
            scores[0] += 1.0 - scores.sum()  # renormalize exactly
            label = TopicLabel(argmax_first(scores.tolist()))
            event = ClassifiedEvent(
                post=post,
                estate_label=EstateLabel.ESTATE,
                estate_score=0.9,
                topic_label=label,
                topic_scores=tuple(scores.tolist()),
            )
            assert event.topic_label.value == argmax_first(event.topic_scores)

    def test_location_with_geotag_only_when_coarsened(self):
        post = make_post("a", "hello", geotag=GeoPoint(1.3, 103.8))
        poi_loc = ResolvedLocation(
            granularity=Granularity.POI,
            poi_id="p1",
            neighbourhood_id="n1",
            latitude=1.3,
            longitude=103.8,
            confidence=0.5,
        )
        with pytest.raises(ValidationError):
            ClassifiedEvent(
                post=post,
                estate_label=EstateLabel.ESTATE,
                estate_score=0.9,
                topic_label=TopicLabel.NOISE,
                topic_scores=(0.0, 0.0, 1.0, 0.0),
                location=poi_loc,
            )


class TestSerialization:
    def _event(self, **kwargs):
        post = make_post("p1", "Lift broken at #Blk123", geotag=GeoPoint(1.35, 103.81))
        defaults = dict(
            post=post,
            estate_label=EstateLabel.ESTATE,
            estate_score=0.875,
            topic_label=TopicLabel.INFRASTRUCTURE,
            topic_scores=(0.7, 0.1, 0.15, 0.05),
            location=ResolvedLocation(
                granularity=Granularity.NEIGHBOURHOOD,
                neighbourhood_id="n42",
                latitude=1.351234,
                longitude=103.812345,
                confidence=0.75,
            ),
            pipeline_seq=17,
        )
        defaults.update(kwargs)
        return ClassifiedEvent(**defaults)

    def test_round_trip_identity(self):
        event = self._event()
        assert event_from_line(event_to_line(event)) == event

    def test_round_trip_minimal_event(self):
        event = ClassifiedEvent(
            post=make_post("p2", "just chatting"),
            estate_label=EstateLabel.NOT_ESTATE,
            estate_score=0.125,
        )
        assert event_from_line(event_to_line(event)) == event

    def test_topic_serialized_by_name(self):
        obj = json.loads(event_to_line(self._event()))
        assert obj["topic_label"] == "Infrastructure"

    def test_canonical_line_is_stable(self):
        event = self._event()
        assert event_to_line(event) == event_to_line(event)

    def test_timestamps_are_utc_seconds(self):
        obj = json.loads(event_to_line(self._event()))
        assert obj["post"]["created_at"].endswith("Z")
        assert parse_timestamp(obj["post"]["created_at"]).tzinfo is timezone.utc


class TestValidateCorpus:
    def test_empty_corpus_is_clean(self):
        assert validate_corpus(Corpus.build([])) == []

    def test_duplicate_id_reported(self):
        posts = [make_post("dup", "one", seconds=0), make_post("dup", "two", seconds=1)]
        violations = validate_corpus(Corpus.build(posts))
        assert any(
            v.post_id == "dup" and "duplicate" in v.invariant for v in violations
        )

    def test_dangling_gold_key_reported(self):
        corpus = Corpus.build(
            [make_post("a", "one")], gold_topic={"ghost": TopicLabel.NOISE}
        )
        violations = validate_corpus(corpus)
        assert any(v.post_id == "ghost" and "dangling" in v.invariant for v in violations)

    def test_out_of_order_detected(self):
        posts = [make_post("b", "later", seconds=5), make_post("a", "earlier", seconds=0)]
        # bypass the sorting constructor deliberately
        corpus = Corpus(posts=tuple(posts))
        violations = validate_corpus(corpus)
        assert any("order" in v.invariant for v in violations)

    def test_tampered_tokens_detected(self):
        good = make_post("a", "hello world")
        bad = Post(
            post_id="b",
            author_pseudonym="anon",
            text="hello world",
            tokens=("tampered",),
            created_at=good.created_at,
        )
        violations = validate_corpus(Corpus.build([good, bad]))
        assert any(v.post_id == "b" and "token" in v.invariant for v in violations)

    def test_clean_corpus_via_build(self):
        posts = [make_post(f"p{i}", f"text {i}", seconds=i) for i in range(5)]
        assert validate_corpus(Corpus.build(posts, gold_estate={"p0": EstateLabel.ESTATE})) == []
