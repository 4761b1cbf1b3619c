import random
from datetime import datetime, timedelta, timezone

import numpy as np
import pytest

from estatewatch.types import Corpus, EstateLabel, GeoPoint, Post, TopicLabel

BASE_TIME = datetime(2024, 3, 1, 8, 0, 0, tzinfo=timezone.utc)

# Disjoint per-class vocabularies make the synthetic corpora linearly
# separable, so a correct trainer must reach perfect training accuracy.
TOPIC_VOCABS = {
    TopicLabel.INFRASTRUCTURE: [f"infraword{j}" for j in range(20)],
    TopicLabel.PARKING: [f"parkword{j}" for j in range(20)],
    TopicLabel.NOISE: [f"noiseword{j}" for j in range(20)],
    TopicLabel.OTHERS: [f"otherword{j}" for j in range(20)],
}
NON_ESTATE_VOCAB = [f"chatterword{j}" for j in range(40)]


def make_post(post_id, text, seconds=0, geotag=None, pseudonym="anon"):
    return Post.build(
        post_id=post_id,
        author_pseudonym=pseudonym,
        text=text,
        created_at=BASE_TIME + timedelta(seconds=seconds),
        geotag=geotag,
    )


def separable_corpus(
    posts_per_topic=100, non_estate=400, words_per_post=6, seed=7
) -> Corpus:
    """Estate posts in four disjoint-vocabulary topics plus chatter posts."""
    rng = random.Random(seed)
    posts, gold_estate, gold_topic = [], {}, {}
    i = 0
    for topic, vocab in TOPIC_VOCABS.items():
        for _ in range(posts_per_topic):
            text = " ".join(rng.choices(vocab, k=words_per_post))
            post = make_post(f"p{i:05d}", text, seconds=i)
            posts.append(post)
            gold_estate[post.post_id] = EstateLabel.ESTATE
            gold_topic[post.post_id] = topic
            i += 1
    for _ in range(non_estate):
        text = " ".join(rng.choices(NON_ESTATE_VOCAB, k=words_per_post))
        post = make_post(f"p{i:05d}", text, seconds=i)
        posts.append(post)
        gold_estate[post.post_id] = EstateLabel.NOT_ESTATE
        i += 1
    return Corpus.build(posts, gold_estate=gold_estate, gold_topic=gold_topic)


def split_corpus(corpus: Corpus, holdout_fraction=0.2, seed=99):
    """Deterministic train/test split preserving the gold maps."""
    rng = random.Random(seed)
    ids = [p.post_id for p in corpus.posts]
    rng.shuffle(ids)
    cut = int(len(ids) * holdout_fraction)
    test_ids = set(ids[:cut])

    def subset(keep):
        posts = [p for p in corpus.posts if (p.post_id in test_ids) == keep]
        pids = {p.post_id for p in posts}
        return Corpus.build(
            posts,
            gold_estate={k: v for k, v in corpus.gold_estate.items() if k in pids}
            if corpus.gold_estate
            else None,
            gold_topic={k: v for k, v in corpus.gold_topic.items() if k in pids}
            if corpus.gold_topic
            else None,
        )

    return subset(False), subset(True)


def synthetic_gazetteer_files(tmp_path, n_pois=50, n_neighbourhoods=10, seed=3):
    """Write gazetteer CSVs with globally unique POI name tokens.

    Returns (directory, poi rows, neighbourhood rows)."""
    rng = random.Random(seed)
    nb_rows = []
    for j in range(n_neighbourhoods):
        nb_rows.append(
            (
                f"nb{j:02d}",
                f"district {j}",
                round(1.25 + 0.01 * j, 6),
                round(103.7 + 0.01 * j, 6),
            )
        )
    poi_rows = []
    for i in range(n_pois):
        nb = nb_rows[i % n_neighbourhoods]
        poi_rows.append(
            (
                f"poi{i:03d}",
                f"landmark{i} wing{i}",
                round(nb[2] + rng.uniform(-0.004, 0.004), 6),
                round(nb[3] + rng.uniform(-0.004, 0.004), 6),
                nb[0],
            )
        )
    gaz_dir = tmp_path / "gazetteer"
    gaz_dir.mkdir(parents=True, exist_ok=True)
    with open(gaz_dir / "pois.csv", "w") as fh:
        fh.write("poi_id,name,lat,lon,neighbourhood_id\n")
        for row in poi_rows:
            fh.write(",".join(str(c) for c in row) + "\n")
    with open(gaz_dir / "neighbourhoods.csv", "w") as fh:
        fh.write("neighbourhood_id,name,centroid_lat,centroid_lon\n")
        for row in nb_rows:
            fh.write(",".join(str(c) for c in row) + "\n")
    return gaz_dir, poi_rows, nb_rows


@pytest.fixture
def rng():
    return np.random.default_rng(42)
