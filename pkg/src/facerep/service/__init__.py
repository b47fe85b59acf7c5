"""HTTP service exposing every command over JSON."""

from facerep.service.app import create_app

__all__ = ["create_app"]
