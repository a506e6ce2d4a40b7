"""Write-then-rename file output, so failed commands leave no partial files."""

from __future__ import annotations

import os
import tempfile
from contextlib import contextmanager

from .errors import PersistenceError


@contextmanager
def atomic_writer(path: str):
    """Text file handle that only appears at `path` when the block succeeds."""
    target = os.path.abspath(path)
    directory = os.path.dirname(target)
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            yield fh
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text(path: str, text: str):
    try:
        with atomic_writer(path) as fh:
            fh.write(text)
    except OSError as exc:
        raise PersistenceError(f"cannot write {path}: {exc}") from exc
