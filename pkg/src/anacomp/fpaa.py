"""Counting model of a field-programmable analogue array.

A device is ``cab_count`` identical computational analogue blocks (CABs),
each holding some number of each resource, plus a switch-matrix budget.
A patch's demand is the sum of per-kind requirements plus a routing cost per
wire; capacity is how many copies of that demand fit, assuming every
resource can be used (no placement or routing geometry).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

from .blocks import Patch

SWITCH = "switch"


class ModelError(ValueError):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class CabInventory:
    capacities: Mapping[str, int]
    cab_count: int = 1
    switch_matrix_budget: int = 0

    def __post_init__(self):
        if self.cab_count < 1:
            raise ModelError("E_MODEL", "cab_count must be at least 1")
        if self.switch_matrix_budget < 0 or any(v < 0 for v in self.capacities.values()):
            raise ModelError("E_MODEL", "capacities must be non-negative")

    def available(self, resource: str) -> int:
        if resource == SWITCH:
            return self.switch_matrix_budget
        return self.capacities.get(resource, 0) * self.cab_count


@dataclass(frozen=True)
class ResourceProfile:
    requirements: Mapping[str, Mapping[str, int]]
    routing_cost: int = 0

    def __post_init__(self):
        if self.routing_cost < 0 or any(
            v < 0 for req in self.requirements.values() for v in req.values()
        ):
            raise ModelError("E_MODEL", "requirements must be non-negative")


def demand(patch: Patch, profile: ResourceProfile) -> dict[str, int]:
    """Total resources for one copy of ``patch``."""
    totals: dict[str, int] = {}
    for bid, blk in patch.blocks.items():
        req = profile.requirements.get(blk.kind.value)
        if req is None:
            raise ModelError("E_UNPROFILED_KIND", f"profile has no entry for {blk.kind.value} ({bid})")
        for res, n in req.items():
            totals[res] = totals.get(res, 0) + n
    if patch.wires or profile.routing_cost:
        totals[SWITCH] = totals.get(SWITCH, 0) + profile.routing_cost * len(patch.wires)
    return totals


def capacity(inventory: CabInventory, need: Mapping[str, int]) -> int:
    """Copies of ``need`` that fit; resources with zero demand are ignored.

    A demand of nothing at all has no finite answer and raises ``E_MODEL``.
    """
    used = {r: n for r, n in need.items() if n > 0}
    if not used:
        raise ModelError("E_MODEL", "the patch demands no resources, so any number of copies fits")
    return min(inventory.available(r) // n for r, n in used.items())


_LINE = re.compile(r"([A-Za-z_][\w.]*)\s*=\s*(.*)$")


def _kv_lines(path):
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _LINE.match(line)
        if not m:
            raise ModelError("E_SYNTAX", f"{path}:{lineno}: expected 'key = value'")
        yield lineno, m[1], m[2].strip()


def _count(path, lineno, text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise ModelError("E_SYNTAX", f"{path}:{lineno}: expected an integer, got {text!r}") from None
    if value < 0:
        raise ModelError("E_MODEL", f"{path}:{lineno}: negative count")
    return value


def load_inventory(path) -> CabInventory:
    """Device file: ``cab_count``, ``switch_matrix_budget`` and ``cab.<resource>`` lines."""
    caps: dict[str, int] = {}
    cab_count, budget = 1, 0
    for lineno, key, value in _kv_lines(path):
        n = _count(path, lineno, value)
        if key == "cab_count":
            cab_count = n
        elif key == "switch_matrix_budget":
            budget = n
        elif key.startswith("cab.") and key.count(".") == 1:
            caps[key[4:]] = n
        else:
            raise ModelError("E_SYNTAX", f"{path}:{lineno}: unknown key {key!r}")
    return CabInventory(caps, cab_count, budget)


def load_profile(path) -> ResourceProfile:
    """Profile file: ``routing_cost`` and ``kind.<kind> = res:n, res:n`` lines."""
    reqs: dict[str, dict[str, int]] = {}
    routing = 0
    for lineno, key, value in _kv_lines(path):
        if key == "routing_cost":
            routing = _count(path, lineno, value)
        elif key.startswith("kind.") and key.count(".") == 1:
            req: dict[str, int] = {}
            for item in filter(None, (s.strip() for s in value.split(","))):
                res, sep, n = item.partition(":")
                if not sep or not res.strip():
                    raise ModelError("E_SYNTAX", f"{path}:{lineno}: expected 'resource:count', got {item!r}")
                req[res.strip()] = _count(path, lineno, n.strip())
            reqs[key[5:]] = req
        else:
            raise ModelError("E_SYNTAX", f"{path}:{lineno}: unknown key {key!r}")
    return ResourceProfile(reqs, routing)
