"""HTTP service wrapping the scoring engine for long-running use."""

from .app import create_app

__all__ = ["create_app"]
