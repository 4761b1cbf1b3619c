"""Estate event detection from social posts.

Subpackages are imported lazily where they pull optional heavyweight
dependencies (the HTTP service); the core data model, classifiers, and
stores are importable directly.
"""

__version__ = "0.1.0"

from .types import (  # noqa: F401
    ClassifiedEvent,
    Corpus,
    EstateLabel,
    GeoPoint,
    Granularity,
    Post,
    ResolvedLocation,
    TopicLabel,
    topic_from_name,
    topic_name,
    validate_corpus,
)
