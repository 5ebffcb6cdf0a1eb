"""Exception hierarchy shared by all modules."""


class CoinferError(Exception):
    """Base class for every error raised by this package."""


class ParseError(CoinferError, ValueError):
    """An input file is malformed (bad JSON/CSV, wrong column count, ...)."""

    def __init__(self, message, *, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)


class ValidationError(CoinferError, ValueError):
    """Input parsed fine but violates a domain invariant."""


class MissingModelError(CoinferError, KeyError):
    """No fitted latency model for a (kind, side) pair."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class CollinearityError(CoinferError, ValueError):
    """Design matrix of a regression is rank deficient."""

