"""Exception hierarchy shared by all modules."""


class SkewlabError(Exception):
    """Base class for all package errors."""


class InputError(SkewlabError):
    """A precondition on user-supplied data was violated."""


class ResourceError(SkewlabError):
    """An enumeration or counting cap was exceeded."""


class ConstructionError(SkewlabError):
    """A constructive procedure failed; the message names the failing step."""
