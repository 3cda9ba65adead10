"""Errors raised while loading run logs."""


class PlotError(Exception):
    """Base class for figure-rendering errors."""


class EmptyLog(PlotError):
    """The CSV contains a header but no data rows (or nothing at all)."""


class MissingColumn(PlotError):
    """A figure kind references a column absent from the CSV header."""

    def __init__(self, path, columns):
        self.path = path
        self.columns = tuple(columns)
        super().__init__(f"{path}: missing column(s) {', '.join(self.columns)}")
