"""Exception hierarchy.

InputError subclasses map to CLI exit code 1; everything else under
InsightError maps to exit code 2.
"""


class InsightError(Exception):
    pass


class InputError(InsightError):
    pass


class BundleError(InputError):
    """Malformed schema bundle: syntax, dangling reference, or duplicate id."""


class FilterSyntaxError(InputError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class DatasetError(InputError):
    pass


class ConfigError(InputError):
    pass


class StatsError(InsightError):
    pass


class RealizationError(InsightError):
    pass


class ModelError(InsightError):
    pass
