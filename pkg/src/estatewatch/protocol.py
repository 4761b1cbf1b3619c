"""The classifier inference wire protocol.

One HTTP POST to `/v1/classify` with `{"text": str, "label_space":
"estate"|"topic"}`, answered by `{"label": int, "scores": [float, ...]}`
where the score vector has 2 (estate) or 4 (topic) entries.  Both the
in-process remote client and any external classifier service speak this
shape; `validate_response` is the single arbiter of conformance.
"""

from enum import Enum

CLASSIFY_PATH = "/v1/classify"


class LabelSpace(Enum):
    ESTATE = "estate"
    TOPIC = "topic"

    @property
    def num_classes(self) -> int:
        return 2 if self is LabelSpace.ESTATE else 4


def classify_request(text: str, label_space: LabelSpace) -> dict:
    return {"text": text, "label_space": label_space.value}


def validate_response(payload, label_space: LabelSpace) -> tuple[int, list[float]]:
    """Check a `/v1/classify` response body; returns (label, scores).

    Raises ValueError with a reason when the payload is out of protocol.
    """
    if not isinstance(payload, dict):
        raise ValueError("response body is not a JSON object")
    if set(payload) - {"label", "scores"}:
        extra = sorted(set(payload) - {"label", "scores"})
        raise ValueError(f"unexpected response fields: {extra}")
    try:
        label = payload["label"]
        scores = payload["scores"]
    except KeyError as exc:
        raise ValueError(f"missing response field: {exc}") from None
    if not isinstance(label, int) or isinstance(label, bool):
        raise ValueError("label must be an integer")
    expected = label_space.num_classes
    if not isinstance(scores, list) or len(scores) != expected:
        raise ValueError(f"scores must be a list of {expected} numbers")
    cleaned: list[float] = []
    for s in scores:
        if not isinstance(s, (int, float)) or isinstance(s, bool):
            raise ValueError("scores must be numbers")
        if not 0.0 <= float(s) <= 1.0:
            raise ValueError("scores must lie in [0, 1]")
        cleaned.append(float(s))
    if abs(sum(cleaned) - 1.0) > 1e-6:
        raise ValueError("scores must sum to 1")
    if not 0 <= label < expected:
        raise ValueError(f"label {label} out of range for {label_space.value}")
    return label, cleaned


def conformance_failures(post, label_space: LabelSpace) -> list[str]:
    """Run the wire-protocol conformance checks against one server.

    `post` is any callable (payload dict) -> (status code, parsed JSON
    body or None); the same checks therefore run against an in-process
    app or a live socket.  Returns a list of human-readable failures,
    empty when the server conforms.
    """
    failures: list[str] = []
    samples = [
        "lift broken at blk 123",
        "loud drilling all night",
        "double parked along the loading bay",
    ]
    first_scores: dict[str, list[float]] = {}
    for text in samples:
        status, body = post(classify_request(text, label_space))
        if status != 200:
            failures.append(f"{label_space.value}: HTTP {status} for valid request")
            continue
        try:
            _, scores = validate_response(body, label_space)
        except ValueError as exc:
            failures.append(f"{label_space.value}: bad response shape: {exc}")
            continue
        first_scores[text] = scores

    # identical text must yield identical scores (fixed weights)
    for text, scores in first_scores.items():
        status, body = post(classify_request(text, label_space))
        if status != 200:
            failures.append(f"{label_space.value}: HTTP {status} on repeat request")
            continue
        _, repeat = validate_response(body, label_space)
        if repeat != scores:
            failures.append(f"{label_space.value}: non-deterministic scores")

    status, _ = post(classify_request("", label_space))
    if status != 400:
        failures.append(f"{label_space.value}: empty text should be 400, got {status}")
    return failures
