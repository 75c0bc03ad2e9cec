from __future__ import annotations

from importlib.resources import files

import pytest

from archrv.dsl import parse_spec
from archrv.events import generate_events

DATA = files("archrv").joinpath("data")


def data_text(name: str) -> str:
    return DATA.joinpath(name).read_text(encoding="utf-8")


def data_path(name: str) -> str:
    return str(DATA.joinpath(name))


@pytest.fixture(scope="session")
def webshop():
    return parse_spec(data_text("webshop.factum"))


@pytest.fixture(scope="session")
def webshop_schemas(webshop):
    return generate_events(webshop.component_types)


@pytest.fixture(scope="session")
def drawing():
    return parse_spec(data_text("drawing.factum"))
