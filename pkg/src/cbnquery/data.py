"""Tabular observations: CSV in and out, strict domain checking, optional row weights."""

import csv
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Tuple

from .errors import DataError


@dataclass(frozen=True)
class Dataset:
    columns: Tuple[str, ...]
    rows: Tuple[Tuple[str, ...], ...]
    weights: Optional[Tuple[Fraction, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(str(v) for v in r) for r in self.rows))
        if len(set(self.columns)) != len(self.columns):
            raise DataError("repeated column names in %s" % (self.columns,))
        for i, r in enumerate(self.rows):
            if len(r) != len(self.columns):
                raise DataError("row %d has %d values, expected %d" % (i + 1, len(r), len(self.columns)))
        if self.weights is not None:
            w = tuple(Fraction(x) for x in self.weights)
            if len(w) != len(self.rows):
                raise DataError("%d weights for %d rows" % (len(w), len(self.rows)))
            if any(x < 0 for x in w):
                raise DataError("negative row weight")
            object.__setattr__(self, "weights", w)

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        try:
            k = self.columns.index(name)
        except ValueError:
            raise DataError("dataset has no column %s" % name) from None
        return [r[k] for r in self.rows]

    def counts(self) -> Counter:
        """Total weight (or count) per distinct row."""
        out = Counter()
        if self.weights is None:
            out.update(self.rows)
        else:
            for r, w in zip(self.rows, self.weights):
                out[r] += w
        return out

    def check_domains(self, cbn):
        for name in self.columns:
            if name not in cbn.names:
                raise DataError("column %s is not a model variable" % name)
        doms = [set(cbn.domain(c)) for c in self.columns]
        for i, r in enumerate(self.rows):
            for name, value, dom in zip(self.columns, r, doms):
                if value not in dom:
                    raise DataError("row %d: value %r outside the domain of %s" % (i + 1, value, name))
        return self


def read_csv(path, cbn=None) -> Dataset:
    """Load a CSV with a header row; with ``cbn``, values are checked against domains.

    A column named ``weight`` is read as exact row weights.
    """
    try:
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            try:
                header = next(reader)
            except StopIteration:
                raise DataError("%s: empty file" % path) from None
            header = [h.strip() for h in header]
            rows = [[v.strip() for v in r] for r in reader if r]
    except OSError as exc:
        raise DataError("cannot read %s: %s" % (path, exc.strerror)) from None
    weights = None
    if "weight" in header:
        k = header.index("weight")
        try:
            weights = [Fraction(r[k]) for r in rows]
        except (ValueError, ZeroDivisionError, IndexError):
            raise DataError("%s: unreadable weight column" % path) from None
        header = header[:k] + header[k + 1:]
        rows = [r[:k] + r[k + 1:] for r in rows]
    if not rows:
        raise DataError("%s: no data rows" % path)
    data = Dataset(tuple(header), tuple(tuple(r) for r in rows), weights)
    if cbn is not None:
        data.check_domains(cbn)
    return data


def write_csv(data: Dataset, path_or_file, columns: Optional[Sequence[str]] = None):
    cols = list(columns or data.columns)
    idx = [data.columns.index(c) for c in cols]

    def emit(fh):
        w = csv.writer(fh, lineterminator="\n")
        header = cols + (["weight"] if data.weights is not None else [])
        w.writerow(header)
        for i, r in enumerate(data.rows):
            row = [r[k] for k in idx]
            if data.weights is not None:
                row.append(str(data.weights[i]))
            w.writerow(row)

    if hasattr(path_or_file, "write"):
        emit(path_or_file)
        return
    try:
        with open(path_or_file, "w", newline="") as fh:
            emit(fh)
    except OSError as exc:
        raise DataError("cannot write %s: %s" % (path_or_file, exc.strerror)) from None
