"""Atomic artifact writing and shared formatting helpers."""

from __future__ import annotations

import os
from contextlib import contextmanager


@contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temp file next to ``path`` and rename into place on success.

    The rename is atomic on POSIX, so readers never observe a partial file.
    """
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    tmp = os.path.join(directory, f".{os.path.basename(path)}.tmp")
    handle = open(tmp, mode, newline="" if "b" not in mode else None)
    try:
        yield handle
        handle.close()
        os.replace(tmp, path)
    except BaseException:
        handle.close()
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def fmt(x) -> str:
    """Format a float with 17 significant digits, enough to round-trip."""
    return f"{float(x):.17g}"
