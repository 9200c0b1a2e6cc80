"""HTTP service layer: pydantic schemas, handlers, FastAPI app."""

from . import handlers, models

__all__ = ["handlers", "models"]
