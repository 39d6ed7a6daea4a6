from pathlib import Path

import pytest

from laborscape.pipeline import toy_config_path

TOY = toy_config_path().parent


@pytest.fixture
def toy_dir() -> Path:
    return TOY


def write(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path
