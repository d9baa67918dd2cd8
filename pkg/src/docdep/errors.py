"""Exception hierarchy shared by all pipeline stages.

``DataError`` covers malformed or inconsistent inputs (CLI exit code 2);
anything else escaping a stage is treated as an internal error (exit code 3).
"""


class DataError(Exception):
    """Base class for input/data problems."""


class InvalidPage(DataError):
    """A detection references a page outside the document's page list."""


class DegenerateBox(DataError):
    """Box normalization produced zero width or height."""


class EmptyROI(DataError):
    """No token of the page grid falls inside the block box."""


class DimMismatch(DataError):
    """Vector dimensionalities disagree."""


class MissingGrid(DataError):
    """A document page has no token grid."""


class NotACandidate(DataError):
    """Edge score requested for a (parent, child) pair outside the candidate set."""


class Diverged(DataError):
    """Training loss became non-finite."""


class IdMismatch(DataError):
    """Predicted and gold structures do not share the same block ids."""


class DuplicateChunkId(DataError):
    """Two chunks with the same id were fed to the indexer."""


class NoDenseVectors(DataError):
    """Dense search requested on an index built without vectors."""


class ConfigInvalid(DataError):
    """A configuration value is out of range or an unknown key was given."""
