"""Transformer inference sidecar for the estatewatch pipeline.

Serves a fine-tuned sequence-classification checkpoint behind the
classifier wire protocol (POST /v1/classify), so the main pipeline can
treat it as a remote backend.
"""

__version__ = "0.1.0"
