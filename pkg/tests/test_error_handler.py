"""
Tests for error categorization, reports and the handler decorator
"""
import io
import json

import pytest

from src.core.error_handler import (
    BranchError,
    ErrorHandler,
    FamilyValidationError,
    InconsistencyError,
    IncompleteDataError,
    InvalidArgumentError,
    handle_errors,
)


def test_exit_codes():
    assert ErrorHandler.exit_code_for(InvalidArgumentError("x")) == 1
    assert ErrorHandler.exit_code_for(IncompleteDataError("x")) == 2
    assert ErrorHandler.exit_code_for(ValueError("x")) == 1
    assert ErrorHandler.exit_code_for(RuntimeError("x")) == 2


def test_one_line_format():
    line = ErrorHandler.format_one_line(FamilyValidationError("bad\nvalue", line=3, field_name="a_n"))
    assert line == "error category=validation type=FamilyValidationError message=bad value (line=3, field=a_n)"


def test_branch_error_condition():
    error = BranchError("winds")
    assert error.condition == "winding"
    assert error.exit_code == 1


@pytest.mark.asyncio
async def test_report_and_statistics(tmp_path):
    handler = ErrorHandler(details_dir=tmp_path)
    report = await handler.handle_error(InconsistencyError("broken"), {"function_name": "decompose"})
    assert report["handled"] and report["exit_code"] == 2
    assert report["severity"] == "critical"
    saved = list(tmp_path.glob("error_details_*.json"))
    assert len(saved) == 1
    assert json.loads(saved[0].read_text())["function_name"] == "decompose"
    stats = handler.get_error_statistics()
    assert stats["total_errors"] == 1
    assert stats["category_distribution"] == {"computation": 1}


@pytest.mark.asyncio
async def test_decorator_converts_failures():
    stream = io.StringIO()

    @handle_errors(ErrorHandler(), stream)
    async def failing():
        raise InvalidArgumentError("nope")

    @handle_errors(ErrorHandler(), stream)
    async def fine():
        return 0

    assert await failing() == 1
    assert await fine() == 0
    assert stream.getvalue().startswith("error category=validation type=InvalidArgumentError")


def test_sync_decorator():
    stream = io.StringIO()

    @handle_errors(ErrorHandler(), stream)
    def failing():
        raise IncompleteDataError("short")

    assert failing() == 2
    assert "type=IncompleteDataError" in stream.getvalue()
