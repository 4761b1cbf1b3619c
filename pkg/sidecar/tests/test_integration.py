"""Full deployment wiring: the main pipeline with both stages remote,
served by two sidecar processes."""

from datetime import datetime, timedelta, timezone

from conftest import LiveServer, make_runtime
from estatewatch.backends import RemoteBackend
from estatewatch.pipeline import Pipeline, PipelineConfig
from estatewatch.protocol import LabelSpace as WireLabelSpace
from estatewatch.types import Corpus, EstateLabel, Post
from estatewatch_sidecar.app import LabelSpace, create_app


def test_pipeline_with_remote_sidecar_backends(
    estate_checkpoint, topic_checkpoint, tmp_path
):
    estate_runtime = make_runtime(estate_checkpoint, LabelSpace.ESTATE)
    topic_runtime = make_runtime(topic_checkpoint, LabelSpace.TOPIC)
    base_time = datetime(2024, 3, 1, 8, 0, tzinfo=timezone.utc)
    posts = [
        Post.build(
            f"int{i:03d}",
            "anon",
            text,
            base_time + timedelta(seconds=i),
        )
        for i, text in enumerate(
            [
                "lift broken at blk 123",
                "loud drilling all night",
                "double parked along the loading bay",
                "noise noise noise",
                "the bay at night",
            ]
        )
    ]
    with LiveServer(create_app(estate_runtime)) as estate_url:
        with LiveServer(create_app(topic_runtime)) as topic_url:
            config = PipelineConfig(
                estate_backend=RemoteBackend(
                    estate_url, WireLabelSpace.ESTATE, timeout_ms=30_000
                ),
                topic_backend=RemoteBackend(
                    topic_url, WireLabelSpace.TOPIC, timeout_ms=30_000
                ),
                store_path=str(tmp_path / "store"),
            )
            with Pipeline(config) as pipeline:
                events = pipeline.process_corpus(Corpus.build(posts))

    assert len(events) == len(posts)
    assert len(pipeline.retry_queue) == 0
    for event in events:
        assert not event.fallback
        if event.estate_label is EstateLabel.ESTATE:
            assert event.topic_label is not None
            assert len(event.topic_scores) == 4
        else:
            assert event.topic_label is None
