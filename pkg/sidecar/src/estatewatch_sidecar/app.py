"""The sidecar service: one loaded checkpoint, one label space.

The request/response shapes mirror the pipeline's remote-backend
contract exactly: `{"text", "label_space"}` in, `{"label", "scores"}`
out, scores summing to 1.  A request for the other label space is a 409
(this process serves a single model); empty text is a 400.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np
import torch
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from transformers import AutoModelForSequenceClassification, AutoTokenizer


class LabelSpace(Enum):
    ESTATE = "estate"
    TOPIC = "topic"

    @property
    def num_classes(self) -> int:
        return 2 if self is LabelSpace.ESTATE else 4


@dataclass(frozen=True)
class SidecarConfig:
    model_dir: str
    label_space: LabelSpace
    listen_host: str = "127.0.0.1"
    listen_port: int = 9090
    max_sequence_length: int = 128


class ClassifierRuntime:
    """Immutable loaded model; forward passes are thread-safe."""

    def __init__(self, config: SidecarConfig):
        self.config = config
        self.tokenizer = AutoTokenizer.from_pretrained(config.model_dir)
        self.model = AutoModelForSequenceClassification.from_pretrained(
            config.model_dir
        )
        self.model.eval()
        loaded = int(self.model.config.num_labels)
        expected = config.label_space.num_classes
        if loaded != expected:
            raise ValueError(
                f"checkpoint has {loaded} labels but label space "
                f"{config.label_space.value!r} needs {expected}"
            )

    def classify(self, text: str) -> tuple[int, list[float]]:
        encoded = self.tokenizer(
            text,
            truncation=True,
            max_length=self.config.max_sequence_length,
            return_tensors="pt",
        )
        with torch.no_grad():
            logits = self.model(**encoded).logits[0]
        scores = torch.softmax(logits.double(), dim=-1).numpy()
        return int(np.argmax(scores)), [float(s) for s in scores]


def create_app(runtime: ClassifierRuntime) -> FastAPI:
    app = FastAPI(title="estatewatch-sidecar", docs_url=None, redoc_url=None)
    served = runtime.config.label_space

    @app.post("/v1/classify")
    def classify(payload: dict):
        space = payload.get("label_space")
        if space != served.value:
            return JSONResponse(
                {"error": f"this sidecar serves label_space {served.value!r}"},
                status_code=409,
            )
        text = payload.get("text")
        if not isinstance(text, str) or not text.strip():
            return JSONResponse({"error": "text must be non-empty"}, status_code=400)
        label, scores = runtime.classify(text)
        return JSONResponse({"label": label, "scores": scores})

    @app.get("/v1/health")
    def health():
        return JSONResponse(
            {
                "status": "ok",
                "label_space": served.value,
                "num_labels": served.num_classes,
                "max_sequence_length": runtime.config.max_sequence_length,
            }
        )

    return app
