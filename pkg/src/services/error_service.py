"""
Mridangam Stroke Transcriber - Error Service

This service provides structured error handling for the command line:
it classifies an exception, logs it at the matching level, prints a
user-facing message to standard error and picks the process exit code.
"""

import logging
import sys
from enum import Enum
from typing import Dict, Optional, TextIO, Tuple, Type

from src.augment import AugmentError
from src.baselines import BaselineError, ZeroVarianceError
from src.config import ConfigurationError
from src.dataset_io import AnnotationParseError, AudioFormatError, DatasetError
from src.evaluation import EvaluationError
from src.experiments import ExperimentError
from src.features import FeatureError
from src.model_store import ModelFormatError
from src.nn.layers import NetworkError
from src.nn.training import TrainingError
from src.onset import OnsetError
from src.synth import SynthError

logger = logging.getLogger(__name__)


class ErrorType(Enum):
    """Different types of errors that can end a command."""

    USER_ERROR = "user_error"  # Bad flags, config or grid
    DATA_ERROR = "data_error"  # Unreadable audio, annotations, manifests
    MODEL_ERROR = "model_error"  # Model files, shapes, training failures
    SYSTEM_ERROR = "system_error"  # Anything unexpected


EXIT_CODES: Dict[ErrorType, int] = {
    ErrorType.USER_ERROR: 2,
    ErrorType.DATA_ERROR: 3,
    ErrorType.MODEL_ERROR: 4,
    ErrorType.SYSTEM_ERROR: 1,
}

# Checked in order; the first matching class decides.
ERROR_CLASSES: Tuple[Tuple[Type[BaseException], ErrorType], ...] = (
    (ConfigurationError, ErrorType.USER_ERROR),
    (ExperimentError, ErrorType.USER_ERROR),
    (SynthError, ErrorType.USER_ERROR),
    (AudioFormatError, ErrorType.DATA_ERROR),
    (AnnotationParseError, ErrorType.DATA_ERROR),
    (DatasetError, ErrorType.DATA_ERROR),
    (AugmentError, ErrorType.DATA_ERROR),
    (OnsetError, ErrorType.DATA_ERROR),
    (FeatureError, ErrorType.DATA_ERROR),
    (EvaluationError, ErrorType.DATA_ERROR),
    (FileNotFoundError, ErrorType.DATA_ERROR),
    (ModelFormatError, ErrorType.MODEL_ERROR),
    (NetworkError, ErrorType.MODEL_ERROR),
    (TrainingError, ErrorType.MODEL_ERROR),
    (ZeroVarianceError, ErrorType.MODEL_ERROR),
    (BaselineError, ErrorType.MODEL_ERROR),
)


class ErrorService:
    """Service for handling command errors with user-friendly messages."""

    # Error messages mapped to error types
    ERROR_MESSAGES: Dict[ErrorType, Dict[str, str]] = {
        ErrorType.USER_ERROR: {
            "title": "❌ Input Error",
            "suggestion": "Check the command-line flags and config file; see --help.",
        },
        ErrorType.DATA_ERROR: {
            "title": "📂 Data Error",
            "suggestion": "Check that the audio is 16/24-bit PCM WAV and the annotations are `seconds,label` lines.",
        },
        ErrorType.MODEL_ERROR: {
            "title": "🧠 Model Error",
            "suggestion": "Make sure the model was trained with the same feature settings.",
        },
        ErrorType.SYSTEM_ERROR: {
            "title": "⚠️ System Error",
            "suggestion": "Rerun with --log-level DEBUG for the full traceback.",
        },
    }

    @classmethod
    def classify(cls, error: BaseException) -> ErrorType:
        for error_class, error_type in ERROR_CLASSES:
            if isinstance(error, error_class):
                return error_type
        return ErrorType.SYSTEM_ERROR

    @classmethod
    def exit_code(cls, error: BaseException) -> int:
        return EXIT_CODES[cls.classify(error)]

    @classmethod
    def handle_error(
        cls,
        error: BaseException,
        command: Optional[str] = None,
        stream: Optional[TextIO] = None,
    ) -> int:
        """
        Handle an error with structured logging and a message on stderr.

        Args:
            error: The exception that ended the command
            command: Subcommand name for the log line (optional)
            stream: Where to print the message (default sys.stderr)

        Returns:
            Nonzero process exit code for the error's type
        """
        error_type = cls.classify(error)
        error_msg = f"{command or 'command'} failed: {error}"

        if error_type is ErrorType.SYSTEM_ERROR:
            logger.error(error_msg, exc_info=error)
        elif error_type is ErrorType.MODEL_ERROR:
            logger.warning(error_msg)
        else:
            logger.info(error_msg)

        stream = stream or sys.stderr
        error_config = cls.ERROR_MESSAGES[error_type]
        try:
            print(f"{error_config['title']}: {error}", file=stream)
            print(f"💡 Suggestion: {error_config['suggestion']}", file=stream)
        except Exception as notification_error:
            logger.error(f"Failed to print error message: {notification_error}")

        return EXIT_CODES[error_type]
