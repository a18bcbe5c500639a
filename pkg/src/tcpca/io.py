"""Small file helpers: atomic writes and full-precision CSV."""
from __future__ import annotations

import contextlib
import csv
import os
import tempfile
from pathlib import Path


def fmt(x) -> str:
    """Shortest round-trip text for a float (ints pass through)."""
    if isinstance(x, (int,)) and not isinstance(x, bool):
        return str(x)
    return repr(float(x))


@contextlib.contextmanager
def atomic_open(path, mode="w", **kwargs):
    """Write to a temporary sibling and rename over ``path`` on success."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows) -> None:
    with atomic_open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([c if isinstance(c, str) else fmt(c) for c in row])


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
