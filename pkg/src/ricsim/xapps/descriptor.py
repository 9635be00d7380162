"""xApp descriptor files: which service models an xApp consumes and what it produces."""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

from ricsim.config import FlatConfig
from ricsim.e2ap import ActionType
from ricsim.errors import ConfigError, UnknownActionType


@dataclass(frozen=True)
class XappDescriptor:
    xapp_name: str
    consumes: tuple[str, ...]
    produces: tuple[ActionType, ...]
    version: str = "0"


def parse_descriptor(cfg: FlatConfig) -> XappDescriptor:
    name = cfg.require("name")
    cfg.require("consumes")
    consumes = tuple(cfg.get_list("consumes"))
    produces_raw = cfg.require("produces")
    produces = []
    for item in (p.strip() for p in produces_raw.split(",") if p.strip()):
        try:
            produces.append(ActionType[item.upper()])
        except KeyError:
            raise UnknownActionType("produces", f"unknown action type {item!r}") from None
    if not name:
        raise ConfigError("name", "must not be empty")
    if not consumes:
        raise ConfigError("consumes", "a subscribing xApp must consume at least one service model")
    return XappDescriptor(name, consumes, tuple(produces), cfg.get("version", "0"))


def load_descriptor(path) -> XappDescriptor:
    return parse_descriptor(FlatConfig.load(path))


def builtin_descriptor(name: str) -> XappDescriptor:
    """Descriptor shipped with the package for ``kpimon`` or ``slicing``."""
    text = resources.files("ricsim.xapps").joinpath(f"{name}.descriptor").read_text(encoding="utf-8")
    return parse_descriptor(FlatConfig.parse(text, f"{name}.descriptor"))
