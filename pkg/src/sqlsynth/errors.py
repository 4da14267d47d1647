"""Exception types shared across the toolkit."""


class SqlSynthError(Exception):
    """Base class for all toolkit errors."""


class CorpusError(SqlSynthError):
    """A dataset or schema file is missing, malformed, or inconsistent."""

    def __init__(self, message: str, *, path: str | None = None, row: int | None = None):
        self.path = path
        self.row = row
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        prefix = f"[{': '.join(where)}] " if where else ""
        super().__init__(prefix + message)


class SqlParseError(SqlSynthError):
    """SQL text falls outside the supported subset or is malformed.

    ``offset`` is the byte offset into the SQL string where parsing failed.
    """

    def __init__(self, message: str, offset: int = 0):
        self.offset = offset
        super().__init__(f"{message} (at offset {offset})")


class ResolutionError(SqlParseError):
    """An identifier in the SQL does not resolve against the schema."""


class TransportError(SqlSynthError):
    """A remote service call failed (timeout, bad status, malformed body)."""
