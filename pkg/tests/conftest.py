import pathlib

import pytest

from tsogames.program import parse_program

HERE = pathlib.Path(__file__).parent
DATA = HERE / "data"
GOLDEN = HERE / "golden"


def load(path):
    return parse_program(pathlib.Path(path).read_text())


@pytest.fixture
def flag_race():
    return load(DATA / "flag_race.prog")


@pytest.fixture
def dekker():
    return load(GOLDEN / "dekker.prog")
