"""Error hierarchy shared by the library and the CLI.

Each class carries the process exit code the CLI maps it to.
"""


class PipelineError(Exception):
    exit_code = 1


class ConfigError(PipelineError):
    """Bad configuration: unknown keys, out-of-range values, missing files."""

    exit_code = 2


class DataError(PipelineError):
    """Malformed or inconsistent input data (corpora, embeddings, labels)."""

    exit_code = 3


class NumericError(PipelineError):
    """Non-finite values or failed numerical procedures."""

    exit_code = 4
