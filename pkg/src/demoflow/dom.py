"""DOM snapshots, element labelling, and robust selector generation.

A snapshot is a parsed, immutable element tree captured from a page at the
moment an interaction happened. Steps never store raw node ids across
snapshots; they store a SelectorSpec, an ordered list of addressing
strategies that can re-locate the element in a later snapshot of the same
page even after cosmetic drift (attribute reordering, whitespace changes,
an inserted unrelated sibling).
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field
from html.parser import HTMLParser
from typing import Iterator, Optional, Union

from .errors import AmbiguousMatch, ElementNotFound, UnknownNode, UnparseableInput

logger = logging.getLogger(__name__)

VOID_TAGS = {
    "area", "base", "br", "col", "embed", "hr", "img", "input",
    "link", "meta", "param", "source", "track", "wbr",
}

SCOPE_ATTR = "data-shadow-scope"


def normalize_text(text: str) -> str:
    """Collapse runs of whitespace and trim. Used for all label and text
    comparisons so formatting-only changes in the source HTML are invisible."""
    return " ".join(text.split())


@dataclass(eq=False)
class Node:
    """One element in a snapshot.

    content preserves the original interleaving of text chunks and child
    elements, which the labelling rules depend on. children and text_content
    are derived views. Identity equality is deliberate: two structurally
    identical siblings are still different elements.
    """

    node_id: str
    tag: str
    attrs: dict[str, str]
    scope_id: Optional[str] = None
    content: list[Union[str, "Node"]] = field(default_factory=list)

    @property
    def children(self) -> list["Node"]:
        return [item for item in self.content if isinstance(item, Node)]

    def text_content(self) -> str:
        parts: list[str] = []
        for item in self.content:
            if isinstance(item, Node):
                parts.append(item.text_content())
            else:
                parts.append(item)
        return "".join(parts)

    def attr(self, name: str) -> Optional[str]:
        return self.attrs.get(name)


class DomSnapshot:
    """An element tree plus the indexes needed for queries and path math."""

    def __init__(self, snapshot_id: str, root: Node, source_html: str):
        self.id = snapshot_id
        self.root = root
        self.source_html = source_html
        self._nodes: dict[str, Node] = {}
        self._parents: dict[str, Optional[str]] = {}
        self._index(root, None)

    def _index(self, node: Node, parent_id: Optional[str]) -> None:
        if node.node_id in self._nodes:
            raise ValueError(f"duplicate node id {node.node_id!r} in snapshot {self.id!r}")
        self._nodes[node.node_id] = node
        self._parents[node.node_id] = parent_id
        for child in node.children:
            self._index(child, node.node_id)

    def node(self, node_id: str) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise UnknownNode(f"no node {node_id!r} in snapshot {self.id!r}") from None

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    def parent(self, node: Node) -> Optional[Node]:
        parent_id = self._parents[node.node_id]
        return self._nodes[parent_id] if parent_id is not None else None

    def iter_nodes(self) -> Iterator[Node]:
        """All element nodes in document (preorder) order."""
        stack = [self.root]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def path_of(self, node_id: str) -> tuple[int, ...]:
        """Child-index path from the root (the root itself is the empty path)."""
        node = self.node(node_id)
        indices: list[int] = []
        while True:
            parent = self.parent(node)
            if parent is None:
                break
            indices.append(parent.children.index(node))
            node = parent
        return tuple(reversed(indices))

    def node_at_path(self, path: tuple[int, ...]) -> Optional[Node]:
        node = self.root
        for index in path:
            kids = node.children
            if index < 0 or index >= len(kids):
                return None
            node = kids[index]
        return node


# --- parsing ---

# tags that implicitly close an open element of the same group, the way
# browsers repair "<li>a<li>b" into two siblings
_IMPLIED_END: dict[str, frozenset[str]] = {
    "li": frozenset({"li"}),
    "p": frozenset({"p"}),
    "option": frozenset({"option"}),
    "tr": frozenset({"tr"}),
    "td": frozenset({"td", "th"}),
    "th": frozenset({"td", "th"}),
    "dt": frozenset({"dt", "dd"}),
    "dd": frozenset({"dt", "dd"}),
}


class _TreeBuilder(HTMLParser):
    def __init__(self) -> None:
        super().__init__(convert_charrefs=True)
        self.top: list[Union[str, Node]] = []
        self.stack: list[Node] = []
        self._counter = 0

    def _new_node(self, tag: str, attr_list: list[tuple[str, Optional[str]]]) -> Node:
        attrs: dict[str, str] = {}
        for name, value in attr_list:
            if name not in attrs:
                attrs[name] = value if value is not None else ""
        node = Node(node_id=f"tmp{self._counter}", tag=tag.lower(), attrs=attrs)
        self._counter += 1
        return node

    def _append(self, item: Union[str, Node]) -> None:
        if self.stack:
            self.stack[-1].content.append(item)
        else:
            self.top.append(item)

    def handle_starttag(self, tag: str, attrs: list[tuple[str, Optional[str]]]) -> None:
        tag = tag.lower()
        closes = _IMPLIED_END.get(tag)
        if closes and self.stack and self.stack[-1].tag in closes:
            self.stack.pop()
        node = self._new_node(tag, attrs)
        self._append(node)
        if tag not in VOID_TAGS:
            self.stack.append(node)

    def handle_startendtag(self, tag: str, attrs: list[tuple[str, Optional[str]]]) -> None:
        self._append(self._new_node(tag, attrs))

    def handle_endtag(self, tag: str) -> None:
        tag = tag.lower()
        if tag in VOID_TAGS:
            return
        # close the nearest matching open element; ignore stray end tags
        for i in range(len(self.stack) - 1, -1, -1):
            if self.stack[i].tag == tag:
                del self.stack[i:]
                return

    def handle_data(self, data: str) -> None:
        if data:
            self._append(data)


def _assign_ids_and_scopes(root: Node) -> None:
    counter = 0

    def walk(node: Node, scope: Optional[str]) -> None:
        nonlocal counter
        node.node_id = f"n{counter}"
        counter += 1
        own = node.attrs.get(SCOPE_ATTR)
        if own:
            scope = own
        node.scope_id = scope
        for child in node.children:
            walk(child, scope)

    walk(root, None)


def parse_snapshot(html: str, snapshot_id: str = "snap") -> DomSnapshot:
    """Parse HTML text into a DomSnapshot.

    Parsing is lossless for elements, attributes, and text placement;
    comments are dropped. Node ids are assigned in document order, so two
    parses of structurally identical markup number their elements the same
    way. Raises UnparseableInput for empty or non-text input.
    """
    if not isinstance(html, str):
        raise UnparseableInput(f"expected HTML text, got {type(html).__name__}")
    if not html.strip():
        raise UnparseableInput("empty HTML input")

    builder = _TreeBuilder()
    builder.feed(html)
    builder.close()

    roots = [item for item in builder.top if isinstance(item, Node)]
    if not roots:
        raise UnparseableInput("input contains no elements")
    if len(roots) == 1:
        root = roots[0]
    else:
        root = Node(node_id="tmp-root", tag="#fragment", attrs={}, content=list(builder.top))
    _assign_ids_and_scopes(root)
    return DomSnapshot(snapshot_id, root, html)


# --- serialization back to HTML ---

def _escape_text(text: str) -> str:
    return text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _escape_attr(value: str) -> str:
    return _escape_text(value).replace('"', "&quot;")


def node_to_html(node: Node, annotate: bool = False) -> str:
    """Serialize a subtree back to HTML. With annotate=True every element
    carries a data-node-id attribute so an embedding UI can map DOM events
    back to snapshot node ids."""
    if node.tag == "#fragment":
        return "".join(
            node_to_html(item, annotate) if isinstance(item, Node) else _escape_text(item)
            for item in node.content
        )
    attrs = dict(node.attrs)
    if annotate:
        attrs["data-node-id"] = node.node_id
    rendered_attrs = "".join(f' {name}="{_escape_attr(value)}"' for name, value in attrs.items())
    open_tag = f"<{node.tag}{rendered_attrs}>"
    if node.tag in VOID_TAGS:
        return open_tag
    inner = "".join(
        node_to_html(item, annotate) if isinstance(item, Node) else _escape_text(item)
        for item in node.content
    )
    return f"{open_tag}{inner}</{node.tag}>"


# --- simple selector queries ---

_PART_RE = re.compile(
    r"(?P<tag>[a-zA-Z][\w-]*|\*)?"
    r"(?P<rest>(?:#[\w-]+|\.[\w-]+|\[[^\]]+\])*)$"
)
_QUALIFIER_RE = re.compile(r"#[\w-]+|\.[\w-]+|\[[^\]]+\]")


@dataclass(frozen=True)
class _SelectorPart:
    tag: Optional[str]
    node_id: Optional[str]
    classes: tuple[str, ...]
    attr_tests: tuple[tuple[str, Optional[str]], ...]


def _parse_part(part: str) -> _SelectorPart:
    match = _PART_RE.match(part)
    if not match or (not match.group("tag") and not match.group("rest")):
        raise ValueError(f"unsupported selector part {part!r}")
    tag = match.group("tag")
    if tag == "*":
        tag = None
    node_id = None
    classes: list[str] = []
    attr_tests: list[tuple[str, Optional[str]]] = []
    for qualifier in _QUALIFIER_RE.findall(match.group("rest") or ""):
        if qualifier.startswith("#"):
            node_id = qualifier[1:]
        elif qualifier.startswith("."):
            classes.append(qualifier[1:])
        else:
            body = qualifier[1:-1]
            if "=" in body:
                name, value = body.split("=", 1)
                attr_tests.append((name.strip(), value.strip().strip("'\"")))
            else:
                attr_tests.append((body.strip(), None))
    return _SelectorPart(tag, node_id, tuple(classes), tuple(attr_tests))


def _part_matches(part: _SelectorPart, node: Node) -> bool:
    if part.tag is not None and node.tag != part.tag:
        return False
    if part.node_id is not None and node.attrs.get("id") != part.node_id:
        return False
    if part.classes:
        have = set((node.attrs.get("class") or "").split())
        if not all(cls in have for cls in part.classes):
            return False
    for name, expected in part.attr_tests:
        actual = node.attrs.get(name)
        if actual is None:
            return False
        if expected is not None and actual != expected:
            return False
    return True


def query(snapshot: DomSnapshot, selector: str, root: Optional[Node] = None) -> list[Node]:
    """Find nodes matching a small CSS-like selector.

    Supports tag, #id, .class, [attr], [attr=value] simple selectors joined
    by descendant whitespace. When root is given, matching is restricted to
    its strict descendants, which is how state predicates stay anchored to
    their semantic object.
    """
    parts = [_parse_part(p) for p in selector.split()]
    if not parts:
        return []

    def descendants(node: Node) -> Iterator[Node]:
        for child in node.children:
            yield child
            yield from descendants(child)

    if root is None:
        pool = [n for n in snapshot.iter_nodes() if _part_matches(parts[0], n)]
    else:
        pool = [n for n in descendants(root) if _part_matches(parts[0], n)]
    for part in parts[1:]:
        seen: set[str] = set()
        next_pool: list[Node] = []
        for candidate in pool:
            for descendant in descendants(candidate):
                if descendant.node_id not in seen and _part_matches(part, descendant):
                    seen.add(descendant.node_id)
                    next_pool.append(descendant)
        order = {n.node_id: i for i, n in enumerate(snapshot.iter_nodes())}
        next_pool.sort(key=lambda n: order[n.node_id])
        pool = next_pool
    return pool


# --- label association ---

_FALLBACK = object()


def _label_with_source(snapshot: DomSnapshot, node: Node) -> tuple[str, object]:
    """Return (label, source) where source is _FALLBACK when no rule fired."""
    # 1. an explicit <label for=...> reference
    own_id = node.attrs.get("id")
    if own_id:
        for candidate in snapshot.iter_nodes():
            if candidate.tag == "label" and candidate.attrs.get("for") == own_id:
                text = normalize_text(candidate.text_content())
                if text:
                    return text, "label-for"
    # 2. aria-label
    aria = normalize_text(node.attrs.get("aria-label") or "")
    if aria:
        return aria, "aria-label"
    # 3. placeholder
    placeholder = normalize_text(node.attrs.get("placeholder") or "")
    if placeholder:
        return placeholder, "placeholder"
    # 4. nearest preceding bare text, scanning siblings then up to three
    #    ancestor levels. Only raw text nodes count; text sitting inside a
    #    preceding element belongs to that element, and skipping elements
    #    for free keeps the association stable when wrappers are injected.
    current = node
    for _hop in range(4):
        parent = snapshot.parent(current)
        if parent is None:
            break
        index = parent.content.index(current)
        for item in reversed(parent.content[:index]):
            if isinstance(item, Node):
                continue
            text = normalize_text(item)
            if text:
                return text, "preceding-text"
        current = parent
    # 5. the element's own visible text (buttons, links, cells)
    own_text = normalize_text(node.text_content())
    if own_text:
        return own_text, "own-text"
    return f"{node.tag} element", _FALLBACK


def associate_label(snapshot: DomSnapshot, node_id: str) -> str:
    """Derive a human-facing name for an element.

    Total and deterministic: every element gets some label, falling back to
    "<tag> element" when nothing textual is associated with it.
    """
    label, _source = _label_with_source(snapshot, snapshot.node(node_id))
    return label


# --- selector strategies ---

@dataclass(frozen=True)
class ById:
    value: str


@dataclass(frozen=True)
class ByName:
    value: str


@dataclass(frozen=True)
class ByLabelAnchor:
    label: str
    tag: str


@dataclass(frozen=True)
class ByPath:
    path: tuple[int, ...]


Strategy = Union[ById, ByName, ByLabelAnchor, ByPath]


@dataclass(frozen=True)
class SelectorSpec:
    """Ordered addressing strategies for one element.

    candidates are tried in order at resolve time; chosen records which
    strategy uniquely resolved when the selector was generated. scope pins
    attribute and label strategies to one shadow scope so identical ids in
    different scopes never collide.
    """

    candidates: tuple[Strategy, ...]
    chosen: int = 0
    scope: Optional[str] = None

    def to_doc(self) -> dict:
        rendered = []
        for candidate in self.candidates:
            if isinstance(candidate, ById):
                rendered.append({"kind": "ById", "value": candidate.value})
            elif isinstance(candidate, ByName):
                rendered.append({"kind": "ByName", "value": candidate.value})
            elif isinstance(candidate, ByLabelAnchor):
                rendered.append({"kind": "ByLabelAnchor", "label": candidate.label, "tag": candidate.tag})
            else:
                rendered.append({"kind": "ByPath", "path": list(candidate.path)})
        doc = {"candidates": rendered, "chosen": self.chosen}
        if self.scope is not None:
            doc["scope"] = self.scope
        return doc

    @staticmethod
    def from_doc(doc: dict) -> "SelectorSpec":
        candidates: list[Strategy] = []
        for item in doc["candidates"]:
            kind = item["kind"]
            if kind == "ById":
                candidates.append(ById(item["value"]))
            elif kind == "ByName":
                candidates.append(ByName(item["value"]))
            elif kind == "ByLabelAnchor":
                candidates.append(ByLabelAnchor(item["label"], item["tag"]))
            elif kind == "ByPath":
                candidates.append(ByPath(tuple(item["path"])))
            else:
                raise ValueError(f"unknown selector strategy {kind!r}")
        return SelectorSpec(tuple(candidates), doc.get("chosen", 0), doc.get("scope"))


def _strategy_matches(snapshot: DomSnapshot, strategy: Strategy, scope: Optional[str]) -> list[Node]:
    if isinstance(strategy, ByPath):
        node = snapshot.node_at_path(strategy.path)
        return [node] if node is not None else []
    matches: list[Node] = []
    for node in snapshot.iter_nodes():
        if node.scope_id != scope:
            continue
        if isinstance(strategy, ById):
            if node.attrs.get("id") == strategy.value:
                matches.append(node)
        elif isinstance(strategy, ByName):
            if node.attrs.get("name") == strategy.value:
                matches.append(node)
        else:
            if node.tag == strategy.tag:
                label, source = _label_with_source(snapshot, node)
                if source is not _FALLBACK and label == strategy.label:
                    matches.append(node)
    return matches


def generate_selector(snapshot: DomSnapshot, node_id: str) -> SelectorSpec:
    """Build a SelectorSpec for an element.

    Candidate order is ById, ByName, ByLabelAnchor, ByPath, skipping
    strategies the element cannot support; ByPath is always present as the
    last resort. The returned spec resolves back to node_id on the same
    snapshot.
    """
    node = snapshot.node(node_id)
    candidates: list[Strategy] = []
    element_id = node.attrs.get("id")
    if element_id:
        candidates.append(ById(element_id))
    name = node.attrs.get("name")
    if name:
        candidates.append(ByName(name))
    label, source = _label_with_source(snapshot, node)
    if source is not _FALLBACK:
        candidates.append(ByLabelAnchor(label, node.tag))
    candidates.append(ByPath(snapshot.path_of(node_id)))

    chosen = len(candidates) - 1
    for index, candidate in enumerate(candidates):
        matches = _strategy_matches(snapshot, candidate, node.scope_id)
        if len(matches) == 1 and matches[0].node_id == node_id:
            chosen = index
            break
    return SelectorSpec(tuple(candidates), chosen, node.scope_id)


def resolve_selector(snapshot: DomSnapshot, spec: SelectorSpec) -> str:
    """Re-locate an element in a snapshot.

    Candidates are tried in order; a candidate matching more than one node
    is skipped. Raises ElementNotFound when nothing matched at all, or
    AmbiguousMatch when matches existed but were never unique.
    """
    saw_ambiguous = False
    for candidate in spec.candidates:
        matches = _strategy_matches(snapshot, candidate, spec.scope)
        if len(matches) == 1:
            return matches[0].node_id
        if len(matches) > 1:
            saw_ambiguous = True
            logger.debug("selector candidate %r ambiguous (%d matches)", candidate, len(matches))
    if saw_ambiguous:
        raise AmbiguousMatch(f"no unique match among {len(spec.candidates)} candidates")
    raise ElementNotFound(f"no candidate matched among {len(spec.candidates)}")
