"""Access to the versioned prompt templates shipped with the package."""
from __future__ import annotations

from functools import lru_cache
from importlib import resources
from string import Template


@lru_cache(maxsize=None)
def text(name: str) -> str:
    """Raw contents of ``prompts/<name>``."""
    return resources.files("auditminer").joinpath("prompts").joinpath(name).read_text(encoding="utf-8")


def render(name: str, **values: str) -> str:
    """Fill a $-placeholder template from the prompt directory."""
    return Template(text(name)).substitute(**values)


def extraction_schema() -> str:
    return text("extraction_schema.txt")
