"""Exception types shared across the package."""


class CilkitError(Exception):
    """Base class for all package errors."""


class ShapeError(CilkitError, ValueError):
    """Array dimensions are inconsistent with what an operation requires."""


class InputError(CilkitError, ValueError):
    """An argument value is outside an operation's domain."""


class StateError(CilkitError, RuntimeError):
    """An object is not in a state that permits the requested operation."""


class NumericError(CilkitError, ArithmeticError):
    """A computation produced non-finite values (training diverged)."""


class CsvParseError(InputError):
    """A CSV row could not be parsed; carries the 1-based line number."""

    def __init__(self, line_number, message):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class CsvSchemaError(InputError):
    """A CSV file does not match the documented feature/label/meta schema."""


class ConfigError(CilkitError, ValueError):
    """An experiment config is invalid; message starts with the field path."""
