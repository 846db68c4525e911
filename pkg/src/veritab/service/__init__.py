"""HTTP service wrapping the verification engine."""

from .app import create_app

__all__ = ["create_app"]
