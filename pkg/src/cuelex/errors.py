"""Exception types shared across the toolkit."""


class CuelexError(Exception):
    """Base class for all expected toolkit failures."""


class InputError(CuelexError):
    """Bad user input: missing files, malformed formats, violated preconditions.

    The CLI maps this to exit status 1; anything else is an internal
    failure (exit status 2).
    """
