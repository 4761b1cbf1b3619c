"""JSON configuration files for the pipeline and the service.

Relative paths inside a config file resolve against the file's own
directory, so a deployment directory can be moved as a unit.  See the
README for the full schema.
"""

import json
import os
from dataclasses import dataclass
from typing import Optional

from .backends import ClassifierBackend, NativeBackend, RemoteBackend
from .errors import SchemaError
from .geolocation import load_gazetteer_dir
from .linear import load_model
from .pipeline import (
    GeolocationMode,
    NativeFallback,
    PipelineConfig,
    QueueFallback,
    RemoteFallback,
)
from .protocol import LabelSpace

DEFAULT_MAX_INFLIGHT = 8
DEFAULT_BODY_LIMIT = 1 << 20  # 1 MiB


def _resolve(base_dir: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def _load_backend(
    obj: dict, space: LabelSpace, base_dir: str, max_inflight: int
) -> ClassifierBackend:
    kind = obj.get("kind")
    if kind == "native":
        path = obj.get("model_path")
        if not path:
            raise SchemaError(f"{space.value} backend: native kind needs model_path")
        return NativeBackend(model=load_model(_resolve(base_dir, path)), label_space=space)
    if kind == "remote":
        endpoint = obj.get("endpoint")
        if not endpoint:
            raise SchemaError(f"{space.value} backend: remote kind needs endpoint")
        return RemoteBackend(
            endpoint=endpoint,
            label_space=space,
            timeout_ms=int(obj.get("timeout_ms", 2000)),
            max_inflight=max_inflight,
        )
    raise SchemaError(f"unknown backend kind {kind!r} (expected native|remote)")


def _load_fallback(obj: Optional[dict], base_dir: str) -> RemoteFallback:
    if obj is None or obj.get("policy", "queue") == "queue":
        return QueueFallback()
    if obj.get("policy") == "native":
        estate_path = obj.get("estate_model_path")
        topic_path = obj.get("topic_model_path")
        return NativeFallback(
            estate_model=load_model(_resolve(base_dir, estate_path))
            if estate_path
            else None,
            topic_model=load_model(_resolve(base_dir, topic_path))
            if topic_path
            else None,
        )
    raise SchemaError(f"unknown fallback policy {obj.get('policy')!r}")


def load_pipeline_config(
    obj: dict, base_dir: str, max_inflight: int = DEFAULT_MAX_INFLIGHT
) -> PipelineConfig:
    try:
        estate = _load_backend(
            obj["estate_backend"], LabelSpace.ESTATE, base_dir, max_inflight
        )
        topic = _load_backend(
            obj["topic_backend"], LabelSpace.TOPIC, base_dir, max_inflight
        )
        store_path = _resolve(base_dir, obj["store_path"])
    except KeyError as exc:
        raise SchemaError(f"pipeline config missing key {exc}") from None
    mode_name = obj.get("geolocation_mode", "off")
    try:
        mode = GeolocationMode(mode_name)
    except ValueError:
        raise SchemaError(f"unknown geolocation_mode {mode_name!r}") from None
    gazetteer = None
    if mode is not GeolocationMode.OFF:
        gaz_dir = obj.get("gazetteer_dir")
        if not gaz_dir:
            raise SchemaError(f"geolocation_mode {mode.value} needs gazetteer_dir")
        gazetteer = load_gazetteer_dir(_resolve(base_dir, gaz_dir))
    return PipelineConfig(
        estate_backend=estate,
        topic_backend=topic,
        store_path=store_path,
        geolocation_mode=mode,
        remote_fallback=_load_fallback(obj.get("remote_fallback"), base_dir),
        gazetteer=gazetteer,
    )


def load_pipeline_config_file(path) -> PipelineConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except ValueError as exc:
            raise SchemaError(f"config {path} is not valid JSON: {exc}") from None
    return load_pipeline_config(obj, os.path.dirname(os.path.abspath(path)))


@dataclass(frozen=True)
class GoldFiles:
    estate: Optional[str] = None
    topic: Optional[str] = None
    location: Optional[str] = None


@dataclass(frozen=True)
class ServiceConfig:
    listen_host: str
    listen_port: int
    pipeline: PipelineConfig
    pseudonym_key_source: Optional[str] = None  # env var name or key file path
    max_inflight_remote: int = DEFAULT_MAX_INFLIGHT
    request_body_limit: int = DEFAULT_BODY_LIMIT
    gold: GoldFiles = GoldFiles()


def load_service_config_file(path) -> ServiceConfig:
    base_dir = os.path.dirname(os.path.abspath(path))
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except ValueError as exc:
            raise SchemaError(f"config {path} is not valid JSON: {exc}") from None
    try:
        listen = obj.get("listen_address", "127.0.0.1:8080")
        host, _, port_text = listen.rpartition(":")
        port = int(port_text)
        if not host:
            raise ValueError("missing host")
    except ValueError as exc:
        raise SchemaError(f"bad listen_address: {exc}") from None
    max_inflight = int(obj.get("max_inflight_remote", DEFAULT_MAX_INFLIGHT))
    body_limit = int(obj.get("request_body_limit", DEFAULT_BODY_LIMIT))
    if max_inflight <= 0 or body_limit <= 0:
        raise SchemaError("max_inflight_remote and request_body_limit must be positive")
    try:
        pipeline_obj = obj["pipeline"]
    except KeyError:
        raise SchemaError("service config missing 'pipeline' section") from None
    gold_obj = obj.get("gold", {})
    gold = GoldFiles(
        estate=_opt_path(gold_obj.get("estate"), base_dir),
        topic=_opt_path(gold_obj.get("topic"), base_dir),
        location=_opt_path(gold_obj.get("location"), base_dir),
    )
    for label, gold_path in (
        ("estate", gold.estate),
        ("topic", gold.topic),
        ("location", gold.location),
    ):
        if gold_path is not None and not os.path.exists(gold_path):
            raise SchemaError(f"gold {label} file does not exist: {gold_path}")
    return ServiceConfig(
        listen_host=host,
        listen_port=port,
        pipeline=load_pipeline_config(pipeline_obj, base_dir, max_inflight),
        pseudonym_key_source=obj.get("pseudonym_key_source"),
        max_inflight_remote=max_inflight,
        request_body_limit=body_limit,
        gold=gold,
    )


def _opt_path(path: Optional[str], base_dir: str) -> Optional[str]:
    return None if path is None else _resolve(base_dir, path)
