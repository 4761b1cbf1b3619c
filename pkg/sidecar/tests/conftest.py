import threading
import time

import pytest
import torch
import uvicorn
from transformers import BertConfig, BertForSequenceClassification, BertTokenizer

from estatewatch_sidecar.app import ClassifierRuntime, LabelSpace, SidecarConfig, create_app

VOCAB = [
    "[PAD]",
    "[UNK]",
    "[CLS]",
    "[SEP]",
    "[MASK]",
    "lift",
    "broken",
    "at",
    "blk",
    "123",
    "loud",
    "drilling",
    "all",
    "night",
    "double",
    "parked",
    "along",
    "the",
    "loading",
    "bay",
    "noise",
    "parking",
    "##s",
    "##ing",
]


def write_tiny_checkpoint(directory, num_labels, seed):
    """A randomly-initialized BERT small enough to run in milliseconds."""
    torch.manual_seed(seed)
    directory.mkdir(parents=True, exist_ok=True)
    vocab_file = directory / "vocab.txt"
    vocab_file.write_text("\n".join(VOCAB) + "\n")
    config = BertConfig(
        vocab_size=len(VOCAB),
        hidden_size=16,
        num_hidden_layers=1,
        num_attention_heads=2,
        intermediate_size=32,
        max_position_embeddings=64,
        num_labels=num_labels,
    )
    model = BertForSequenceClassification(config)
    model.save_pretrained(directory)
    BertTokenizer(str(vocab_file)).save_pretrained(directory)
    return directory


@pytest.fixture(scope="session")
def estate_checkpoint(tmp_path_factory):
    return write_tiny_checkpoint(
        tmp_path_factory.mktemp("ckpt") / "estate", num_labels=2, seed=1
    )


@pytest.fixture(scope="session")
def topic_checkpoint(tmp_path_factory):
    return write_tiny_checkpoint(
        tmp_path_factory.mktemp("ckpt") / "topic", num_labels=4, seed=2
    )


def make_runtime(checkpoint, label_space, max_seq_len=32):
    return ClassifierRuntime(
        SidecarConfig(
            model_dir=str(checkpoint),
            label_space=label_space,
            max_sequence_length=max_seq_len,
        )
    )


@pytest.fixture(scope="session")
def estate_runtime(estate_checkpoint):
    return make_runtime(estate_checkpoint, LabelSpace.ESTATE)


@pytest.fixture(scope="session")
def topic_runtime(topic_checkpoint):
    return make_runtime(topic_checkpoint, LabelSpace.TOPIC)


class LiveServer:
    """Run the app on a real socket so clients exercise actual HTTP."""

    def __init__(self, app):
        self._config = uvicorn.Config(
            app, host="127.0.0.1", port=0, log_level="warning"
        )
        self.server = uvicorn.Server(self._config)
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self) -> str:
        self.thread.start()
        deadline = time.time() + 10
        while not self.server.started:
            if time.time() > deadline:
                raise RuntimeError("sidecar server did not start")
            time.sleep(0.01)
        port = self.server.servers[0].sockets[0].getsockname()[1]
        return f"http://127.0.0.1:{port}"

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)


@pytest.fixture(scope="session")
def live_estate_server(estate_runtime):
    with LiveServer(create_app(estate_runtime)) as base_url:
        yield base_url
