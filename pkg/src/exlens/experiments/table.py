"""Tabular experiment output: CSV rows behind a '#'-prefixed metadata block."""

import csv
import io
import math

import numpy as np
import scipy

from .. import __version__

__all__ = ["ResultTable", "format_value", "read_table"]


def format_value(v):
    """Deterministic text for one cell; missing values are empty."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return ""
        return repr(v)
    return str(v)


class ResultTable:
    """Rows of one experiment plus the metadata needed to regenerate them."""

    def __init__(self, columns, rows=None, metadata=None, config_text=None):
        self.columns = list(columns)
        self.rows = [tuple(r) for r in (rows or [])]
        self.metadata = dict(metadata or {})
        self.config_text = config_text

    def add(self, *row):
        if len(row) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(row)}")
        self.rows.append(tuple(row))

    def sort(self, n_keys):
        self.rows.sort(key=lambda r: tuple(_sort_key(v) for v in r[:n_keys]))
        return self

    def column(self, name):
        i = self.columns.index(name)
        return [r[i] for r in self.rows]

    def where(self, **match):
        idx = {k: self.columns.index(k) for k in match}
        return [r for r in self.rows if all(r[i] == match[k] for k, i in idx.items())]

    def header_lines(self):
        meta = {"package_version": __version__, "numpy_version": np.__version__,
                "scipy_version": scipy.__version__}
        meta.update(self.metadata)
        lines = [f"# {k}: {meta[k]}" for k in sorted(meta)]
        if self.config_text:
            lines.append("# config:")
            lines.extend(f"#   {line}" for line in self.config_text.rstrip("\n").splitlines())
        return lines

    def to_csv(self, stream=None):
        buf = io.StringIO()
        for line in self.header_lines():
            buf.write(line + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for r in self.rows:
            writer.writerow([format_value(v) for v in r])
        text = buf.getvalue()
        if stream is not None:
            stream.write(text)
        return text

    def write(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fh:
            self.to_csv(fh)


def _sort_key(v):
    if isinstance(v, str):
        return (1, 0.0, v)
    if v is None:
        return (2, 0.0, "")
    return (0, float(v), "")


def read_table(path):
    """Parse a CSV written by :meth:`ResultTable.write` into (columns, rows)."""
    with open(path, encoding="utf-8") as fh:
        body = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(body)
    columns = next(reader)
    return columns, [row for row in reader]
