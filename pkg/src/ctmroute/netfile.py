"""JSON network documents (schema version "1").

Example::

    {
      "schema_version": "1",
      "kind": "parallel",
      "exogenous_flow_veh_per_h": 1500,
      "links": [
        {"id": "1", "capacity_veh_per_h": 1500, "jam_density_veh_per_km": 187.5,
         "free_speed_km_per_h": 40, "length_km": 1.0},
        ...
      ],
      "routes": [["1", "2", "3"], ["4", "5", "6", "7"]]
    }

General networks use ``"kind": "general"``, add ``"tail"`` and ``"head"`` node
ids to every link and name the ``"origin"`` and ``"destination"`` nodes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Optional, Union

from .errors import CTMError, DomainError
from .fundamental import Link, ParallelNetwork, Route, validate_network
from .generalnet import GeneralNetwork

SCHEMA_VERSION = "1"
LINK_FIELDS = {
    "capacity_veh_per_h": "capacity",
    "jam_density_veh_per_km": "jam_density",
    "free_speed_km_per_h": "free_speed",
    "length_km": "length",
}
BUNDLED = ("example1", "example2", "example3", "wheatstone")


class InputError(CTMError, ValueError):
    """Unreadable, malformed or schema-violating input."""


@dataclass(frozen=True)
class NetworkDocument:
    kind: str
    network: Union[ParallelNetwork, GeneralNetwork]
    link_ids: tuple[str, ...]
    route_labels: tuple[str, ...]
    exogenous_flow: Optional[float]
    raw: dict

    def link(self, link_id: str) -> Link:
        try:
            i = self.link_ids.index(link_id)
        except ValueError:
            raise InputError(f"unknown link id {link_id!r}; known: {list(self.link_ids)}") from None
        return self._links[i]

    @property
    def _links(self) -> tuple[Link, ...]:
        if self.kind == "general":
            return self.network.links
        by_name = {l.name: l for r in self.network.routes for l in r.links}
        return tuple(by_name[i] for i in self.link_ids)


def resolve(path: Union[str, Path]) -> Path:
    """Accept a file path or the name of a bundled network (``example1`` ...)."""
    p = Path(path)
    if p.exists():
        return p
    stem = p.name[:-5] if p.name.endswith(".json") else p.name
    if stem in BUNDLED:
        return Path(str(resources.files("ctmroute") / "networks" / f"{stem}.json"))
    raise InputError(f"no such network file: {path}")


def parse_network(path: Union[str, Path]) -> NetworkDocument:
    """Read and validate a network document.

    Raises:
        InputError: syntax errors (with line and column) and schema violations
            (naming the offending field).
        AssumptionViolation: the network breaks a model assumption.
    """
    p = resolve(path)
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"cannot read {p}: {exc}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{p}: JSON syntax error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    return load_document(raw)


def _field(obj: dict, key: str, where: str, kind=None) -> Any:
    if not isinstance(obj, dict) or key not in obj:
        raise InputError(f"{where}: missing field {key!r}")
    value = obj[key]
    if kind is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise InputError(f"{where}.{key}: expected a finite number, got {value!r}")
        return float(value)
    if kind is not None and not isinstance(value, kind):
        raise InputError(f"{where}.{key}: expected {kind.__name__}, got {type(value).__name__}")
    return value


def load_document(raw: dict) -> NetworkDocument:
    if not isinstance(raw, dict):
        raise InputError("document: expected a JSON object")
    version = _field(raw, "schema_version", "document", str)
    if version != SCHEMA_VERSION:
        raise InputError(f"document.schema_version: unsupported version {version!r}")
    kind = _field(raw, "kind", "document", str)
    if kind not in ("parallel", "general"):
        raise InputError(f"document.kind: expected 'parallel' or 'general', got {kind!r}")
    phi = None
    if "exogenous_flow_veh_per_h" in raw:
        phi = _field(raw, "exogenous_flow_veh_per_h", "document", float)

    raw_links = _field(raw, "links", "document", list)
    if not raw_links:
        raise InputError("document.links: at least one link is required")
    links, ids, tails, heads = [], [], [], []
    for i, item in enumerate(raw_links):
        where = f"links[{i}]"
        lid = _field(item, "id", where, str)
        if lid in ids:
            raise InputError(f"{where}.id: duplicate link id {lid!r}")
        values = {attr: _field(item, key, where, float) for key, attr in LINK_FIELDS.items()}
        try:
            links.append(Link.make(name=lid, **values))
        except DomainError as exc:
            raise InputError(f"{where}: {exc}") from None
        ids.append(lid)
        if kind == "general":
            tails.append(_field(item, "tail", where, str))
            heads.append(_field(item, "head", where, str))

    raw_routes = _field(raw, "routes", "document", list)
    if not raw_routes:
        raise InputError("document.routes: at least one route is required")
    routes = []
    for r, seq in enumerate(raw_routes):
        if not isinstance(seq, list) or not seq or not all(isinstance(s, str) for s in seq):
            raise InputError(f"routes[{r}]: expected a non-empty list of link ids")
        for s in seq:
            if s not in ids:
                raise InputError(f"routes[{r}]: unknown link id {s!r}")
        routes.append(tuple(ids.index(s) for s in seq))

    if kind == "general":
        origin = _field(raw, "origin", "document", str)
        dest = _field(raw, "destination", "document", str)
        try:
            net = GeneralNetwork(tuple(links), tuple(tails), tuple(heads), origin, dest, tuple(routes))
        except DomainError as exc:
            raise InputError(f"document: {exc}") from None
        labels = tuple(str(r + 1) for r in range(len(routes)))
        return NetworkDocument(kind, net, tuple(ids), labels, phi, raw)

    used = [i for seq in routes for i in seq]
    if len(used) != len(set(used)):
        raise InputError("routes: parallel routes must not share links")
    route_objs = [Route(tuple(links[i] for i in seq), name=str(r + 1)) for r, seq in enumerate(routes)]
    net = validate_network(route_objs)
    labels = tuple(route.name for route in net.routes)
    return NetworkDocument(kind, net, tuple(ids), labels, phi, raw)
