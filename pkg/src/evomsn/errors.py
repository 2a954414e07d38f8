"""Exception hierarchy shared across the package."""


class EvoMSNError(Exception):
    """Base class for all errors raised by evomsn."""


class SeriesTooShort(EvoMSNError):
    pass


class InvalidPeriod(EvoMSNError):
    pass


class SignalTooShort(EvoMSNError):
    pass


class NoData(EvoMSNError):
    pass


class LengthMismatch(EvoMSNError):
    pass


class ShapeError(EvoMSNError, ValueError):
    pass


class OrderViolation(EvoMSNError):
    pass


class ConfigError(EvoMSNError):
    pass


class UnknownKey(ConfigError):
    def __init__(self, key: str):
        super().__init__(f"unknown config key: {key!r}")
        self.key = key


class RangeError(ConfigError):
    def __init__(self, key: str, detail: str = ""):
        msg = f"value out of range for {key!r}"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)
        self.key = key


class EmptyFile(EvoMSNError):
    pass


class ParseError(EvoMSNError):
    """Non-numeric cell in a CSV file. ``row`` and ``column`` are 1-based file coordinates."""

    def __init__(self, row: int, column: int, value: str, path: str = ""):
        where = f"{path}: " if path else ""
        super().__init__(f"{where}row {row}, column {column}: cannot parse {value!r} as a number")
        self.row = row
        self.column = column
        self.value = value
