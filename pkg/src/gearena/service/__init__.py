"""FastAPI service exposing the arena's operations as JSON endpoints."""

from .app import app, create_app

__all__ = ["app", "create_app"]
