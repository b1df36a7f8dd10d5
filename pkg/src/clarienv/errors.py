"""Exception taxonomy shared across the toolkit.

UsageError marks caller mistakes (bad arguments, violated preconditions) and maps
to exit code 2 in the CLI; everything else maps to exit code 1.
"""


class ClarienvError(Exception):
    """Base class for all toolkit errors."""


class UsageError(ClarienvError):
    """The caller violated a precondition or passed invalid input."""


class ParseError(ClarienvError):
    """A document could not be parsed; carries the byte offset when known."""

    def __init__(self, message: str, offset: int | None = None):
        super().__init__(message)
        self.offset = offset


class SchemaError(ClarienvError):
    """A parseable document is missing or misusing a required field."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(message)
        self.path = path


class ReferenceError_(ClarienvError):
    """A graph option points at a node id that does not exist."""

    def __init__(self, message: str, source_id: str = "", target_id: str = ""):
        super().__init__(message)
        self.source_id = source_id
        self.target_id = target_id


class PipelineError(ClarienvError):
    """An LLM reply could not be turned into a valid artifact after retrying."""

    def __init__(self, message: str, raw_reply: str | None = None):
        super().__init__(message)
        self.raw_reply = raw_reply


class JudgeError(ClarienvError):
    """An LLM judge reply stayed unparseable after the retry."""


class ProviderUnavailableError(ClarienvError):
    """A remote provider kept failing after the retry budget was spent."""

    def __init__(self, message: str, attempts: int):
        super().__init__(message)
        self.attempts = attempts


class ScriptError(ClarienvError):
    """Test-harness failure: the scripted chat provider had no matching entry."""


class ConsistencyError(ClarienvError):
    """Supposedly matching artifacts (dialogue / trajectory / graph) disagree."""


class TraversalComplete(ClarienvError):
    """Signal: the traversal stack is exhausted. Not a usage error."""
