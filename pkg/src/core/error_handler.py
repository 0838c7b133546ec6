"""
Error handling for the Bagchi toolkit
Exception hierarchy, error categorization and structured error reports
with exit-code mapping for the command line front end.
"""
import asyncio
import json
import logging
import sys
import traceback
import uuid
from dataclasses import asdict, dataclass, field
from datetime import datetime
from enum import Enum
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import aiofiles
import psutil

logger = logging.getLogger(__name__)


class ErrorSeverity(Enum):
    LOW = "low"
    MEDIUM = "medium"
    HIGH = "high"
    CRITICAL = "critical"


class ErrorCategory(Enum):
    VALIDATION = "validation"
    COMPUTATION = "computation"
    SYSTEM = "system"


EXIT_CODES = {
    ErrorCategory.VALIDATION: 1,
    ErrorCategory.COMPUTATION: 2,
    ErrorCategory.SYSTEM: 2,
}


class BagchiError(Exception):
    """Base class for every error raised by the toolkit"""

    category = ErrorCategory.COMPUTATION
    severity = ErrorSeverity.MEDIUM

    @property
    def exit_code(self) -> int:
        return EXIT_CODES[self.category]


class ValidationError(BagchiError):
    category = ErrorCategory.VALIDATION
    severity = ErrorSeverity.LOW


class ComputationError(BagchiError):
    category = ErrorCategory.COMPUTATION
    severity = ErrorSeverity.HIGH


class InvalidArgumentError(ValidationError):
    pass


class UsageError(ValidationError):
    pass


class EmptyFamilyError(ValidationError):
    pass


class WrongOperatorError(ValidationError):
    pass


class InadmissibleTargetError(ValidationError):
    def __init__(self, message: str, condition: str = "positivity"):
        super().__init__(message)
        self.condition = condition


class BranchError(InadmissibleTargetError):
    def __init__(self, message: str):
        super().__init__(message, condition="winding")


class FamilyValidationError(ValidationError):
    """Malformed family data, with the offending line and field"""

    def __init__(self, message: str, line: Optional[int] = None, field_name: Optional[str] = None):
        location = []
        if line is not None:
            location.append(f"line={line}")
        if field_name is not None:
            location.append(f"field={field_name}")
        super().__init__(f"{message} ({', '.join(location)})" if location else message)
        self.line = line
        self.field_name = field_name


class SingularFactorError(ComputationError):
    pass


class DegenerateEigenspaceError(ComputationError):
    pass


class IncompleteDataError(ComputationError):
    pass


class InconsistencyError(ComputationError):
    severity = ErrorSeverity.CRITICAL


class WeightFailureError(ComputationError):
    pass


@dataclass
class ErrorContext:
    error_id: str
    timestamp: datetime
    error_type: str
    error_message: str
    category: ErrorCategory
    severity: ErrorSeverity
    exit_code: int
    function_name: str
    stack_trace: str
    input_data: Dict
    system_state: Dict


@dataclass
class ErrorHandler:
    """Turns exceptions into structured reports and exit codes"""

    details_dir: Optional[Path] = None
    error_log: List[ErrorContext] = field(default_factory=list)

    def __post_init__(self):
        if self.details_dir is not None:
            self.details_dir = Path(self.details_dir)
            self.details_dir.mkdir(parents=True, exist_ok=True)

    async def handle_error(self, error: BaseException, context: Optional[Dict] = None) -> Dict:
        """Log the error, persist its details and build the report"""
        context = context or {}
        error_context = self._analyze_error(error, context)
        await self._log_error(error_context)
        self.error_log.append(error_context)
        return {
            "error_id": error_context.error_id,
            "handled": True,
            "category": error_context.category.value,
            "severity": error_context.severity.value,
            "exit_code": error_context.exit_code,
            "message": self.format_one_line(error),
        }

    @staticmethod
    def categorize(error: BaseException) -> tuple:
        if isinstance(error, BagchiError):
            return error.category, error.severity
        if isinstance(error, (ValueError, TypeError, KeyError)):
            return ErrorCategory.VALIDATION, ErrorSeverity.LOW
        if isinstance(error, (MemoryError, OSError)):
            return ErrorCategory.SYSTEM, ErrorSeverity.CRITICAL
        return ErrorCategory.COMPUTATION, ErrorSeverity.MEDIUM

    @classmethod
    def exit_code_for(cls, error: BaseException) -> int:
        return EXIT_CODES[cls.categorize(error)[0]]

    @classmethod
    def format_one_line(cls, error: BaseException) -> str:
        category, _ = cls.categorize(error)
        message = " ".join(str(error).split())
        return f"error category={category.value} type={type(error).__name__} message={message}"

    def _analyze_error(self, error: BaseException, context: Dict) -> ErrorContext:
        category, severity = self.categorize(error)
        stack_trace = "".join(traceback.format_exception(type(error), error, error.__traceback__))
        return ErrorContext(
            error_id=f"ERR-{datetime.now().strftime('%Y%m%d')}-{str(uuid.uuid4())[:8]}",
            timestamp=datetime.now(),
            error_type=type(error).__name__,
            error_message=str(error),
            category=category,
            severity=severity,
            exit_code=EXIT_CODES[category],
            function_name=context.get("function_name", "unknown"),
            stack_trace=stack_trace,
            input_data=context,
            system_state=self._get_system_state(),
        )

    @staticmethod
    def _get_system_state() -> Dict:
        try:
            return {
                "cpu_percent": psutil.cpu_percent(),
                "memory_percent": psutil.virtual_memory().percent,
                "process_rss_mb": psutil.Process().memory_info().rss / 2**20,
                "timestamp": datetime.now().isoformat(),
            }
        except Exception:
            return {"error": "Could not retrieve system state"}

    async def _log_error(self, error_context: ErrorContext):
        log = logger.warning if error_context.category == ErrorCategory.VALIDATION else logger.error
        log(f"❌ {error_context.error_id}: {error_context.error_type}: {error_context.error_message}")
        logger.debug(error_context.stack_trace)

        if self.details_dir is None:
            return
        try:
            path = self.details_dir / f"error_details_{error_context.error_id}.json"
            async with aiofiles.open(path, "w") as f:
                await f.write(json.dumps(asdict(error_context), indent=2, default=str))
        except Exception as e:
            logger.error(f"Failed to save error details: {e}")

    def get_error_statistics(self) -> Dict:
        total_errors = len(self.error_log)
        if total_errors == 0:
            return {"total_errors": 0}

        severity_counts: Dict[str, int] = {}
        category_counts: Dict[str, int] = {}
        for error in self.error_log:
            severity_counts[error.severity.value] = severity_counts.get(error.severity.value, 0) + 1
            category_counts[error.category.value] = category_counts.get(error.category.value, 0) + 1

        return {
            "total_errors": total_errors,
            "severity_distribution": severity_counts,
            "category_distribution": category_counts,
        }


def handle_errors(error_handler: ErrorHandler, stream=None):
    """Decorator: run a handler and convert any failure into an exit code"""

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        async def async_wrapper(*args, **kwargs) -> Any:
            try:
                return await func(*args, **kwargs)
            except Exception as e:
                report = await error_handler.handle_error(e, {"function_name": func.__name__})
                print(report["message"], file=stream or sys.stderr)
                return report["exit_code"]

        @wraps(func)
        def sync_wrapper(*args, **kwargs) -> Any:
            try:
                return func(*args, **kwargs)
            except Exception as e:
                print(ErrorHandler.format_one_line(e), file=stream or sys.stderr)
                category, _ = ErrorHandler.categorize(e)
                return EXIT_CODES[category]

        return async_wrapper if asyncio.iscoroutinefunction(func) else sync_wrapper

    return decorator
