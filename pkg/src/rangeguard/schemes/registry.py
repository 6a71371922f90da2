"""Scheme configurations and Map Tag dispatch.

Physical address bits [57:54] carry a 4-bit Map Tag.  Tag 0 always selects
the exact SEC-DED scheme; tags 1-15 select registered slots.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path

from ..bitnum import BF16, NumFormat, get_format
from ..rangemap import RangeMap
from .base import ConfigError, Scheme, Unprotected
from .baseline import BaselineOeccCrc
from .nulling import WeightNulling
from .rangeguard import RangeGuardScheme, RgConfig, RgKind
from .secded import SecDed
from .symbol import Ssc8

CONFIG_VERSION = 1
TAG_SHIFT = 54
TAG_BITS = 4


class SchemeKind(enum.Enum):
    RG8B_SSC = "rg8b_ssc"
    RG4B_DSC = "rg4b_dsc"
    BASELINE = "baseline"
    SECDED = "secded"
    SSC8 = "ssc8"
    WEIGHT_NULLING = "weight_nulling"
    NONE = "none"

    @property
    def is_rangeguard(self) -> bool:
        return self in (SchemeKind.RG8B_SSC, SchemeKind.RG4B_DSC)


@dataclass(frozen=True)
class SchemeConfig:
    kind: SchemeKind
    range_map: RangeMap | None = None
    format: NumFormat = BF16

    def __post_init__(self):
        if self.kind.is_rangeguard:
            if self.range_map is None:
                raise ConfigError(f"{self.kind.value} needs a RangeMap")
            self.rg_config().check()

    def rg_config(self) -> RgConfig:
        return RgConfig(RgKind(self.kind.value), self.range_map)

    def build(self) -> Scheme:
        k = self.kind
        if k.is_rangeguard:
            return RangeGuardScheme(self.rg_config())
        if k is SchemeKind.BASELINE:
            return BaselineOeccCrc()
        if k is SchemeKind.SECDED:
            return SecDed()
        if k is SchemeKind.SSC8:
            return Ssc8()
        if k is SchemeKind.WEIGHT_NULLING:
            return WeightNulling(self.format)
        return Unprotected()


SECDED_CONFIG = SchemeConfig(SchemeKind.SECDED)


def map_tag(address: int) -> int:
    return (address >> TAG_SHIFT) & ((1 << TAG_BITS) - 1)


class Registry:
    def __init__(self, slots: dict[int, SchemeConfig] | None = None):
        self._slots: dict[int, SchemeConfig] = {}
        for tag, cfg in (slots or {}).items():
            self.register(tag, cfg)

    def register(self, tag: int, cfg: SchemeConfig) -> None:
        if not 1 <= tag < (1 << TAG_BITS):
            raise ConfigError(f"tag {tag} cannot be registered (0 is reserved for SEC-DED)")
        self._slots[tag] = cfg

    def lookup(self, tag: int) -> SchemeConfig:
        if tag == 0:
            return SECDED_CONFIG
        try:
            return self._slots[tag]
        except KeyError:
            raise ConfigError(f"no scheme registered for map tag {tag}") from None

    def dispatch(self, address: int) -> SchemeConfig:
        return self.lookup(map_tag(address))

    @property
    def tags(self) -> list[int]:
        return sorted(self._slots)

    @classmethod
    def from_file(cls, path) -> "Registry":
        path = Path(path)
        obj = json.loads(path.read_text())
        if obj.get("version") != CONFIG_VERSION:
            raise ConfigError(f"unsupported registry version {obj.get('version')!r}")
        reg = cls()
        for tag, slot in obj.get("slots", {}).items():
            kind = SchemeKind(slot["scheme"])
            rmap = None
            if "map" in slot:
                rmap = RangeMap.load((path.parent / slot["map"]))
            fmt = get_format(slot["format"]) if "format" in slot else (rmap.format if rmap else BF16)
            if rmap is not None and rmap.format != fmt:
                raise ConfigError(f"slot {tag}: map format {rmap.format.name} != {fmt.name}")
            reg.register(int(tag), SchemeConfig(kind, rmap, fmt))
        return reg


def map_tag_dispatch(address: int, registry: Registry | None = None) -> SchemeConfig:
    return (registry or Registry()).dispatch(address)
