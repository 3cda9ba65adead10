"""Loading simulator run logs.

A run log is a CSV with a single header row; every column except the trailing
``phase`` column is numeric.  The loader is deliberately ignorant of the
simulator itself: anything with the expected columns plots fine.
"""

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import EmptyLog, MissingColumn


@dataclass
class RunLog:
    """One parsed run log: named numeric columns plus a label for legends."""

    path: str
    label: str
    columns: dict  # name -> float ndarray (the "phase" column is kept as str)

    def __getitem__(self, name):
        return self.columns[name]

    def __contains__(self, name):
        return name in self.columns

    def require(self, names):
        missing = [n for n in names if n not in self.columns]
        if missing:
            raise MissingColumn(self.path, missing)


def load_log(path):
    """Parse one CSV run log into a RunLog."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyLog(f"{path}: file is empty") from None
        rows = list(reader)
    if not rows:
        raise EmptyLog(f"{path}: no data rows")
    columns = {}
    table = list(zip(*rows))
    for name, values in zip(header, table):
        if name == "phase":
            columns[name] = np.asarray(values)
        else:
            columns[name] = np.asarray(values, dtype=float)
    label = os.path.splitext(os.path.basename(path))[0]
    return RunLog(path=path, label=label, columns=columns)
