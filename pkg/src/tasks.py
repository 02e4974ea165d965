"""Celery entrypoint for the worker container; the inference tasks register via ``app.include``."""

from .app import celery

__all__ = ["celery"]
