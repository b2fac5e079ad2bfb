"""Exception hierarchy. Every error the CLI reports maps to one of these classes."""


class LithorouteError(Exception):
    """Base class for all package errors."""


class SchemaError(LithorouteError):
    """Column mapping or label schema is missing something mandatory."""


class DataError(LithorouteError):
    """Input rows are inconsistent (depth ordering, empty channels, ...)."""


class LabelError(LithorouteError):
    """A label string or index is not part of the active schema."""


class ConfigError(LithorouteError):
    """Pipeline configuration failed validation."""


class MissingArtifactError(LithorouteError):
    """An upstream command has not produced the artifact this step needs."""


class SequencingError(LithorouteError):
    """Windows were scheduled out of the required top-down order."""


class ProfileError(LithorouteError):
    """Evidence profile fields disagree with its tool flags."""


class BackendError(LithorouteError):
    """The reasoning backend could not produce a completion."""
