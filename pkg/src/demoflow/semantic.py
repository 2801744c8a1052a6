"""Semantic object detection: recognizing widgets and their states.

A selected element is matched against a catalog of widget kinds (result
tables, file attachments) using tag and attribute hints on the element or
a nearby ancestor. The detected object gets a friendly name taken from
surrounding headings, a robust anchor selector, and a state predicate in
the closed DSL. Detection can optionally consult an external oracle
endpoint; its answer is validated and falls back to the rule-based
detector when unusable.
"""

from __future__ import annotations

import json
import logging
import os
import re
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Optional

import requests

from . import dom, predicate
from .errors import (
    AmbiguousMatch,
    ElementNotFound,
    InvalidPredicate,
    MalformedOracleResponse,
    NoSemanticMatch,
    OracleUnreachable,
)

logger = logging.getLogger(__name__)

ANCESTOR_HOPS = 4
HEADING_TAGS = {"h1", "h2", "h3", "h4", "h5", "h6"}

# noun appended to the derived name, per kind
_KIND_NOUNS = {
    "SearchResultTable": "table",
    "FileAttachment": "attachment",
}


@dataclass(frozen=True)
class CatalogEntry:
    kind: str
    states: tuple[str, ...]
    hint_tags: tuple[str, ...]
    hint_attr_patterns: tuple[str, ...]


@dataclass(frozen=True)
class SemanticCatalog:
    entries: tuple[CatalogEntry, ...]

    def entry(self, kind: str) -> Optional[CatalogEntry]:
        for item in self.entries:
            if item.kind == kind:
                return item
        return None

    def to_wire(self) -> list[dict]:
        return [{"kind": e.kind, "states": list(e.states)} for e in self.entries]


def load_catalog(text: str) -> SemanticCatalog:
    doc = json.loads(text)
    entries = []
    for raw in doc["entries"]:
        hints = raw.get("hints", {})
        entries.append(
            CatalogEntry(
                kind=raw["kind"],
                states=tuple(raw["states"]),
                hint_tags=tuple(hints.get("tags", [])),
                hint_attr_patterns=tuple(hints.get("attributePatterns", [])),
            )
        )
    return SemanticCatalog(tuple(entries))


def default_catalog() -> SemanticCatalog:
    text = resources.files("demoflow").joinpath("data/semantic_catalog.json").read_text("utf-8")
    return load_catalog(text)


@dataclass(frozen=True)
class SemanticObject:
    """A recognized widget: identity, anchor, and how to read its state."""

    object_id: str
    kind: str
    friendly_name: str
    anchor: dom.SelectorSpec
    state_names: tuple[str, ...]
    predicate: predicate.StatePredicate

    def to_doc(self) -> dict:
        return {
            "objectId": self.object_id,
            "kind": self.kind,
            "friendlyName": self.friendly_name,
            "anchor": self.anchor.to_doc(),
            "stateNames": list(self.state_names),
            "predicate": self.predicate.source,
        }

    @staticmethod
    def from_doc(doc: dict) -> "SemanticObject":
        return SemanticObject(
            object_id=doc["objectId"],
            kind=doc["kind"],
            friendly_name=doc["friendlyName"],
            anchor=dom.SelectorSpec.from_doc(doc["anchor"]),
            state_names=tuple(doc["stateNames"]),
            predicate=predicate.parse_predicate(doc["predicate"]),
        )


def slugify(text: str) -> str:
    slug = re.sub(r"[^a-z0-9]+", "-", text.lower()).strip("-")
    return slug or "object"


# --- hint matching ---

def _pattern_matches(pattern: str, node: dom.Node) -> bool:
    if "~=" in pattern:
        name, needle = pattern.split("~=", 1)
        value = node.attrs.get(name.strip())
        return value is not None and needle.strip() in value.split()
    if "=" in pattern:
        name, expected = pattern.split("=", 1)
        return node.attrs.get(name.strip()) == expected.strip()
    return pattern.strip() in node.attrs


def _entry_matches(entry: CatalogEntry, node: dom.Node) -> bool:
    if node.tag in entry.hint_tags:
        return True
    return any(_pattern_matches(p, node) for p in entry.hint_attr_patterns)


def _find_container(
    snapshot: dom.DomSnapshot, node_id: str, catalog: SemanticCatalog
) -> tuple[dom.Node, CatalogEntry]:
    node: Optional[dom.Node] = snapshot.node(node_id)
    for _hop in range(ANCESTOR_HOPS + 1):
        if node is None:
            break
        for entry in catalog.entries:
            if _entry_matches(entry, node):
                return node, entry
        node = snapshot.parent(node)
    raise NoSemanticMatch(f"no catalog entry matches node {node_id!r} or its nearby ancestors")


# --- naming ---

def _heading_text(node: dom.Node) -> Optional[str]:
    if node.tag in HEADING_TAGS:
        text = dom.normalize_text(node.text_content())
        return text or None
    found: Optional[str] = None
    for child in node.children:
        text = _heading_text(child)
        if text:
            found = text  # keep the last one, it sits closest to what follows
    return found


def friendly_name_for(snapshot: dom.DomSnapshot, anchor: dom.Node, kind: str) -> str:
    """Name the object the way a user would refer to it.

    Preference order: a table caption, a heading inside the anchor, the
    nearest preceding heading, then the anchor's associated label. The kind
    noun ("table", "attachment") is appended when not already present.
    """
    base: Optional[str] = None
    if anchor.tag == "table":
        for child in anchor.children:
            if child.tag == "caption":
                base = dom.normalize_text(child.text_content()) or None
                break
    if base is None:
        for child in anchor.children:
            text = _heading_text(child)
            if text:
                base = text
                break
    if base is None:
        current = anchor
        for _hop in range(ANCESTOR_HOPS):
            parent = snapshot.parent(current)
            if parent is None:
                break
            index = parent.content.index(current)
            for item in reversed(parent.content[:index]):
                if isinstance(item, dom.Node):
                    text = _heading_text(item)
                    if text:
                        base = text
                        break
            if base is not None:
                break
            current = parent
    if base is None:
        base = dom.associate_label(snapshot, anchor.node_id)

    noun = _KIND_NOUNS.get(kind)
    if noun and not base.lower().endswith(noun):
        return f"{base} {noun}"
    return base


# --- rule-based predicate construction ---

def _build_predicate(entry: CatalogEntry) -> predicate.StatePredicate:
    if entry.kind == "SearchResultTable":
        source = (
            'case "no records": rowCount("tbody tr") == 0\n'
            'case "one record": rowCount("tbody tr") == 1\n'
            'case "multiple records": rowCount("tbody tr") >= 2'
        )
    elif entry.kind == "FileAttachment":
        source = (
            'case "present": exists(".file-link") or exists("[data-attachment-file]")\n'
            'case "absent": not (exists(".file-link") or exists("[data-attachment-file]"))'
        )
    else:
        raise NoSemanticMatch(f"no predicate builder for catalog kind {entry.kind!r}")
    built = predicate.parse_predicate(source)
    predicate.validate_states(built, list(entry.states))
    return built


def detect_object(
    snapshot: dom.DomSnapshot,
    node_id: str,
    catalog: Optional[SemanticCatalog] = None,
    oracle: Optional["OracleConfig"] = None,
    transport: Optional["Transport"] = None,
) -> SemanticObject:
    """Detect the semantic object behind a selected element.

    Hint matching walks from the element up to four ancestor levels;
    raises NoSemanticMatch when nothing in the catalog applies. When an
    oracle endpoint is configured its answer is preferred, with validation
    failures logged and the rule-based result used instead.
    """
    catalog = catalog or default_catalog()
    anchor, entry = _find_container(snapshot, node_id, catalog)
    anchor_selector = dom.generate_selector(snapshot, anchor.node_id)

    if oracle is not None:
        try:
            fragment = dom.node_to_html(anchor)
            oracle_object = oracle_detect(fragment, catalog, oracle, transport=transport)
            return SemanticObject(
                object_id=oracle_object.object_id,
                kind=oracle_object.kind,
                friendly_name=oracle_object.friendly_name,
                anchor=anchor_selector,
                state_names=oracle_object.state_names,
                predicate=oracle_object.predicate,
            )
        except (OracleUnreachable, MalformedOracleResponse, InvalidPredicate) as exc:
            logger.warning("oracle detection failed (%s); using rule-based detector", exc)

    name = friendly_name_for(snapshot, anchor, entry.kind)
    return SemanticObject(
        object_id=slugify(name),
        kind=entry.kind,
        friendly_name=name,
        anchor=anchor_selector,
        state_names=entry.states,
        predicate=_build_predicate(entry),
    )


# --- state evaluation and suggestions ---

def evaluate_state(obj: SemanticObject, snapshot: dom.DomSnapshot) -> str:
    """Read the object's current state from a snapshot.

    Total and pure: an unresolvable anchor or a predicate with no matching
    case yields "unknown" rather than an error.
    """
    try:
        anchor_id = dom.resolve_selector(snapshot, obj.anchor)
    except (ElementNotFound, AmbiguousMatch):
        return predicate.UNKNOWN_STATE
    return predicate.evaluate(obj.predicate, snapshot, snapshot.node(anchor_id))


def suggest_conditions(obj: SemanticObject, snapshot: dom.DomSnapshot) -> list[str]:
    """Condition texts for the teaching UI, current state first."""
    current = evaluate_state(obj, snapshot)
    ordered = [s for s in obj.state_names if s == current]
    ordered += [s for s in obj.state_names if s != current]
    return [f"Condition {obj.friendly_name} {state}" for state in ordered]


# --- oracle client ---

Transport = Callable[[str, dict, dict], dict]


@dataclass(frozen=True)
class OracleConfig:
    url: str
    token: Optional[str] = None

    @staticmethod
    def from_env() -> Optional["OracleConfig"]:
        url = os.environ.get("ORACLE_URL")
        if not url:
            return None
        return OracleConfig(url, os.environ.get("ORACLE_TOKEN"))


def _http_transport(url: str, payload: dict, headers: dict) -> dict:
    try:
        response = requests.post(url, json=payload, headers=headers, timeout=15)
        response.raise_for_status()
    except requests.RequestException as exc:
        raise OracleUnreachable(str(exc)) from exc
    try:
        return response.json()
    except ValueError as exc:
        raise MalformedOracleResponse("oracle response is not JSON") from exc


def _match_entry(catalog: SemanticCatalog, reported_type: str) -> CatalogEntry:
    wanted = re.sub(r"[^a-z0-9]", "", reported_type.lower())
    for entry in catalog.entries:
        kind_key = re.sub(r"[^a-z0-9]", "", entry.kind.lower())
        if wanted == kind_key or wanted in kind_key or reported_type.lower() in entry.hint_tags:
            return entry
    raise MalformedOracleResponse(f"oracle reported unknown type {reported_type!r}")


def oracle_detect(
    element_html: str,
    catalog: SemanticCatalog,
    config: OracleConfig,
    transport: Optional[Transport] = None,
) -> SemanticObject:
    """Ask the external detection endpoint about an element.

    The request carries the element markup and the states catalog; the
    response must supply type, name, states_considered and evaluator_dsl.
    The evaluator is parsed and checked against the catalog before use, so
    a bad answer can never smuggle an unevaluable predicate into a program.
    """
    send = transport or _http_transport
    headers = {"Content-Type": "application/json"}
    if config.token:
        headers["Authorization"] = f"Bearer {config.token}"
    payload = {"element_html": element_html, "states_catalog": catalog.to_wire()}
    response = send(config.url, payload, headers)

    if not isinstance(response, dict):
        raise MalformedOracleResponse("oracle response must be a JSON object")
    for key in ("type", "name", "states_considered", "evaluator_dsl"):
        if key not in response:
            raise MalformedOracleResponse(f"oracle response missing {key!r}")
    if not isinstance(response["name"], str) or not response["name"].strip():
        raise MalformedOracleResponse("oracle response has an empty name")
    if not isinstance(response["states_considered"], list):
        raise MalformedOracleResponse("states_considered must be a list")

    entry = _match_entry(catalog, str(response["type"]))
    built = predicate.parse_predicate(str(response["evaluator_dsl"]))
    predicate.validate_states(built, list(entry.states))

    fragment = dom.parse_snapshot(element_html, snapshot_id="oracle-fragment")
    name = response["name"].strip()
    return SemanticObject(
        object_id=slugify(name),
        kind=entry.kind,
        friendly_name=name,
        anchor=dom.generate_selector(fragment, fragment.root.node_id),
        state_names=entry.states,
        predicate=built,
    )
