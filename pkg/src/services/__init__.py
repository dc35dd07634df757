# Services package for Mridangam Stroke Transcriber
from .error_service import ErrorService, ErrorType

__all__ = ["ErrorService", "ErrorType"]
