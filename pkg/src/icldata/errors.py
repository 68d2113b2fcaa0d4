"""Exception types shared across the pipeline."""


class PipelineError(Exception):
    """Base class for pipeline failures."""


class ConfigError(PipelineError):
    """Invalid or inconsistent configuration."""


class ConstructorError(PipelineError):
    """A task constructor received input it cannot build an example from."""


class RenderError(PipelineError):
    """A template could not be rendered (missing field, malformed pattern)."""
