import contextlib
import os
import tempfile
from pathlib import Path

FLOAT_FORMAT = "{:.12g}"


def fmt_float(x) -> str:
    """Canonical text for a float: 12 significant digits, integers without a point."""
    x = float(x)
    if x != x:
        return "nan"
    if x.is_integer() and abs(x) < 1e15:
        return str(int(x))
    return FLOAT_FORMAT.format(x)


@contextlib.contextmanager
def atomic_open(path, mode="w", encoding="utf-8", newline=""):
    """Write to a sibling temp file and rename it over ``path`` on success."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        kwargs = {} if "b" in mode else {"encoding": encoding, "newline": newline}
        with os.fdopen(fd, mode, **kwargs) as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise
