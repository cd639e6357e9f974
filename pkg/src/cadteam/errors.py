"""Exception types shared across the pipeline."""


class CadTeamError(Exception):
    """Base class for every pipeline error."""


class ConfigError(CadTeamError):
    """Run configuration is missing or invalid (CLI exit code 3)."""


class EmptySpecification(CadTeamError):
    """Neither sketches nor text were supplied."""


class IllegalTransition(CadTeamError):
    """A session event is not legal for the current phase."""


class TransientProviderError(CadTeamError):
    """Transport-level provider failure; eligible for retry."""


class ProviderTimeout(TransientProviderError):
    """A single provider attempt exceeded the configured timeout."""


class PermanentProviderError(CadTeamError):
    """Provider failure that retrying cannot fix (auth, malformed request)."""


class MalformedTranscript(CadTeamError):
    """A transcript file could not be parsed."""


class MalformedEnvelope(CadTeamError):
    """A summary envelope was opened but never closed."""


class MaxRoundsExceeded(CadTeamError):
    """The clarification loop hit its round cap without a final summary."""


class DocsUnavailable(CadTeamError):
    """Documentation could not be fetched and no cached copy exists."""


class UnparseablePlan(CadTeamError):
    """The planning reply contained no numbered steps."""


class EmptyCompletion(CadTeamError):
    """The provider returned an empty code completion."""


class ExecutionFailed(CadTeamError):
    """Script execution exited nonzero."""

    def __init__(self, message: str, stderr: str = ""):
        super().__init__(message)
        self.stderr = stderr


class ExecutionTimeout(CadTeamError):
    """Script execution exceeded the backend wall-clock timeout."""


class OutputMissing(CadTeamError):
    """Script exited cleanly but produced no mesh file."""


class ApprovalDenied(CadTeamError):
    """A human declined to execute the generated script."""


class MaxAttemptsExceeded(CadTeamError):
    """The design loop ran out of attempts without producing an artifact."""


class MalformedStl(CadTeamError):
    """An STL file has a bad header, counts, or non-finite coordinates."""


class EmptyMesh(CadTeamError):
    """An STL file parsed but contains no triangles."""


class ScriptExhausted(CadTeamError):
    """A scripted reply source ran out of replies."""
