"""Per-iteration convergence records and their CSV serialization.

Trace files are the primary experiment output. Float cells are written with
``repr`` so identical runs produce byte-identical files; wall-clock columns
default to 0 for the same reason (pass ``record_wall_time=True`` to a solver
to keep real timings at the cost of reproducible bytes).
"""

from __future__ import annotations

import numpy as np


class IterateTrace:
    """Append-only table keyed by iteration count, with fixed columns."""

    def __init__(self, columns, meta=None):
        self.columns = tuple(columns)
        if self.columns[0] != "k":
            raise ValueError("first trace column must be 'k'")
        self.rows = []
        self.meta = dict(meta or {})

    def append(self, **fields):
        row = []
        for col in self.columns:
            if col not in fields:
                raise KeyError(f"trace row missing column {col!r}")
            row.append(fields[col])
        if self.rows and fields["k"] < self.rows[-1][0]:
            raise ValueError("trace iterations must be monotone")
        self.rows.append(tuple(row))

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        idx = self.columns.index(name)
        return np.array([row[idx] for row in self.rows], dtype=np.float64)

    def last(self, name):
        idx = self.columns.index(name)
        return self.rows[-1][idx]

    @staticmethod
    def _format(value):
        if isinstance(value, (int, np.integer)):
            return str(int(value))
        return repr(float(value))

    def to_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(",".join(self.columns) + "\n")
            for row in self.rows:
                fh.write(",".join(self._format(v) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip().split(",")
            trace = cls(header)
            for line in fh:
                parts = line.strip().split(",")
                trace.rows.append(tuple(float(tok) for tok in parts))
        return trace


def checkpoints(n_iters, per_decade=8):
    """Log-spaced iteration indices (always including 1 and n_iters)."""
    if n_iters < 1:
        return []
    ks = {1, n_iters}
    count = max(2, int(np.ceil(np.log10(max(n_iters, 2)) * per_decade)))
    for v in np.logspace(0, np.log10(n_iters), count):
        ks.add(int(round(v)))
    return sorted(k for k in ks if 1 <= k <= n_iters)
