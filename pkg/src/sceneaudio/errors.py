"""Exception hierarchy shared across the package.

The command-line tool maps these onto exit codes: validation problems
exit 2, file problems exit 3, anything else 4.
"""


class SceneAudioError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(SceneAudioError):
    """Input violates a schema, format, dimension, or value constraint."""


class DegenerateGeometryError(ValidationError):
    """Geometry has no well-defined convex hull (collinear or too few points)."""


class FileError(SceneAudioError):
    """A referenced file is missing, unreadable, corrupt, or unwritable."""
