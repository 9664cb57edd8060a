"""Exception hierarchy. The CLI maps each branch to an exit code."""


class ToolkitError(Exception):
    exit_code = 4


class ConfigError(ToolkitError, ValueError):
    exit_code = 2


class DataError(ToolkitError, ValueError):
    exit_code = 3


class SchemaError(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class PlausibilityError(DataError):
    def __init__(self, offenders):
        self.offenders = list(offenders)
        shown = ", ".join(f"row {r} {c}={v}" for r, c, v in self.offenders[:10])
        more = "" if len(self.offenders) <= 10 else f" (+{len(self.offenders) - 10} more)"
        super().__init__(f"{len(self.offenders)} out-of-range cells: {shown}{more}")


class ModelError(ToolkitError):
    exit_code = 4


class FitError(ModelError):
    pass


class ConvergenceError(FitError):
    pass
