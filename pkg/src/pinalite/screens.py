"""App screens as element trees and triple-store snapshot graphs.

A screen file is one JSON document ``{package, activity, root}`` where ``root``
recursively describes the element tree. Trees are converted into snapshot
graphs of (subject, predicate, object) triples; all predicates an element
exposes become triples, tree edges become HAS_PARENT/HAS_CHILD pairs, and
sibling geometry becomes ABOVE/BELOW/LEFT/RIGHT edges. The strings a screen
shows are summarized as (app context, content) information entries.

Everything here is an immutable value; graphs built from equal trees are
equal.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from typing import Any, Iterator, Mapping

from .errors import DocumentError


@dataclass(frozen=True)
class AppContext:
    """Identifies one screen of one app: (package name, activity name)."""

    package_name: str
    activity_name: str

    def __post_init__(self):
        for label, value in (("package_name", self.package_name),
                            ("activity_name", self.activity_name)):
            if not value:
                raise DocumentError(f"{label} must be non-empty")
            if "\x1f" in value:
                raise DocumentError(f"{label} must not contain the 0x1F delimiter byte")


@dataclass(frozen=True)
class HiddenValue:
    """Placeholder for an obfuscated string: carries only its salted hash."""

    hash: str

    def __str__(self) -> str:  # pragma: no cover - debugging aid
        return f"<hidden {self.hash[:12]}…>"


@dataclass(frozen=True)
class UiElement:
    """One node of a screen's element tree.

    ``bounds`` is (left, top, right, bottom) in screen pixels. ``children``
    keeps the order the app laid the elements out in (menu order), which is
    meaningful and preserved end to end. ``text`` and ``content_description``
    may hold a :class:`HiddenValue` in obfuscated snapshots.
    """

    element_id: str
    class_name: str
    text: str | HiddenValue | None = None
    content_description: str | HiddenValue | None = None
    view_id: str | None = None
    bounds: tuple[int, int, int, int] = (0, 0, 0, 0)
    clickable: bool = False
    scrollable: bool = False
    focused: bool = False
    enabled: bool = True
    children: tuple["UiElement", ...] = ()

    def __post_init__(self):
        left, top, right, bottom = self.bounds
        if left > right or top > bottom:
            raise DocumentError(
                f"element {self.element_id!r} has inverted bounds {self.bounds}")

    def walk(self) -> Iterator["UiElement"]:
        """Yield this element and all descendants in depth-first order."""
        yield self
        for child in self.children:
            yield from child.walk()


class Predicate(Enum):
    """Edge labels of the snapshot graph."""

    HAS_CLASS_NAME = "class"
    HAS_TEXT = "text"
    HAS_CONTENT_DESCRIPTION = "content-desc"
    HAS_HIDDEN_TEXT = "hidden-text"
    HAS_HIDDEN_CONTENT_DESCRIPTION = "hidden-content-desc"
    HAS_VIEW_ID = "view-id"
    HAS_SCREEN_LOCATION = "screen-location"
    IS_CLICKABLE = "clickable"
    IS_SCROLLABLE = "scrollable"
    IS_FOCUSED = "focused"
    IS_ENABLED = "enabled"
    HAS_PARENT = "parent"
    HAS_CHILD = "child"
    ABOVE = "above"
    BELOW = "below"
    LEFT = "left"
    RIGHT = "right"
    CONTAINS_PRICE = "contains-price"
    CONTAINS_DATE = "contains-date"


#: Predicates whose object is a string the user saw on screen.
TEXT_PREDICATES = frozenset({Predicate.HAS_TEXT, Predicate.HAS_CONTENT_DESCRIPTION})
#: Boolean element properties; queryable as bare flags.
FLAG_PREDICATES = frozenset({
    Predicate.IS_CLICKABLE, Predicate.IS_SCROLLABLE,
    Predicate.IS_FOCUSED, Predicate.IS_ENABLED,
})
#: Predicates relating two elements (object is an entity id, not a literal).
RELATIONAL_PREDICATES = frozenset({
    Predicate.HAS_PARENT, Predicate.HAS_CHILD,
    Predicate.ABOVE, Predicate.BELOW, Predicate.LEFT, Predicate.RIGHT,
})
#: Predicates compared by screen_match: layout shape, not content.
STRUCTURAL_PREDICATES = frozenset({
    Predicate.HAS_CLASS_NAME, Predicate.HAS_VIEW_ID,
    Predicate.HAS_PARENT, Predicate.HAS_CHILD,
}) | FLAG_PREDICATES


@dataclass(frozen=True)
class Triple:
    subject: str
    predicate: Predicate
    obj: str

    def __repr__(self) -> str:
        return f"({self.subject}, {self.predicate.name}, {self.obj!r})"


@dataclass(frozen=True)
class UiSnapshotGraph:
    """Triple-store view of one screen.

    ``order`` lists entity ids in document (depth-first) order; the triple set
    alone cannot recover sibling order, and query evaluation needs it.
    """

    context: AppContext
    triples: frozenset[Triple]
    root: str
    order: tuple[str, ...]

    def __post_init__(self):
        by_subject: dict[str, dict[Predicate, list[str]]] = {}
        for t in self.triples:
            by_subject.setdefault(t.subject, {}).setdefault(t.predicate, []).append(t.obj)
        object.__setattr__(self, "_index", by_subject)
        object.__setattr__(self, "_positions", {e: i for i, e in enumerate(self.order)})

    # -- lookup helpers used by the query engine and the obfuscator --

    def objects(self, subject: str, predicate: Predicate) -> list[str]:
        return self._index.get(subject, {}).get(predicate, [])

    def value(self, subject: str, predicate: Predicate) -> str | None:
        objs = self.objects(subject, predicate)
        return objs[0] if objs else None

    def has(self, subject: str, predicate: Predicate, obj: str) -> bool:
        return obj in self.objects(subject, predicate)

    def position(self, entity: str) -> int:
        return self._positions[entity]

    def in_document_order(self, entities) -> list[str]:
        return sorted(entities, key=self._positions.__getitem__)


@dataclass(frozen=True)
class InfoEntry:
    """One (app context, content) pair: a string plus the screen it appeared on."""

    context: AppContext
    content: str

    def __post_init__(self):
        if not self.content.strip():
            raise DocumentError("InfoEntry content must be non-empty after trimming")


# ---------------------------------------------------------------------------
# Screen documents
# ---------------------------------------------------------------------------

_ELEMENT_KEYS = {
    "id", "class", "text", "content_desc", "view_id", "bounds",
    "clickable", "scrollable", "focused", "enabled", "children",
}


def _parse_text_field(value: Any, path: str) -> str | HiddenValue | None:
    if value is None or isinstance(value, str):
        return value
    if isinstance(value, Mapping) and value.get("hidden") is True:
        digest = value.get("hash")
        if not isinstance(digest, str):
            raise DocumentError("hidden field must carry a string 'hash'", path)
        return HiddenValue(digest)
    raise DocumentError(f"expected string or hidden marker, got {type(value).__name__}", path)


def _parse_element(node: Any, path: str, counter: list[int],
                   seen_ids: set[str]) -> UiElement:
    if not isinstance(node, Mapping):
        raise DocumentError("element must be an object", path)
    unknown = set(node) - _ELEMENT_KEYS
    if unknown:
        raise DocumentError(f"unknown element fields {sorted(unknown)}", path)
    class_name = node.get("class")
    if not isinstance(class_name, str) or not class_name:
        raise DocumentError("element is missing required 'class'", path)

    explicit_id = node.get("id")
    if explicit_id is not None and not isinstance(explicit_id, str):
        raise DocumentError("'id' must be a string", path)
    element_id = explicit_id if explicit_id is not None else f"e{counter[0]}"
    counter[0] += 1
    if element_id in seen_ids:
        raise DocumentError(f"duplicate element_id {element_id!r}", path)
    seen_ids.add(element_id)

    bounds_raw = node.get("bounds", [0, 0, 0, 0])
    if (not isinstance(bounds_raw, (list, tuple)) or len(bounds_raw) != 4
            or not all(isinstance(v, int) for v in bounds_raw)):
        raise DocumentError("'bounds' must be four integers [l, t, r, b]", path)

    children_raw = node.get("children", [])
    if not isinstance(children_raw, list):
        raise DocumentError("'children' must be a list", path)
    children = tuple(
        _parse_element(child, f"{path}.children[{i}]", counter, seen_ids)
        for i, child in enumerate(children_raw)
    )

    def flag(name: str, default: bool = False) -> bool:
        value = node.get(name, default)
        if not isinstance(value, bool):
            raise DocumentError(f"'{name}' must be a boolean", path)
        return value

    try:
        return UiElement(
            element_id=element_id,
            class_name=class_name,
            text=_parse_text_field(node.get("text"), f"{path}.text"),
            content_description=_parse_text_field(node.get("content_desc"), f"{path}.content_desc"),
            view_id=node.get("view_id"),
            bounds=tuple(bounds_raw),
            clickable=flag("clickable"),
            scrollable=flag("scrollable"),
            focused=flag("focused"),
            enabled=flag("enabled", True),
            children=children,
        )
    except DocumentError as err:
        if err.path is None:
            raise DocumentError(str(err), path) from None
        raise


def load_screen(document: Mapping[str, Any]) -> UiElement:
    """Parse a screen document's element tree.

    Elements without an explicit ``id`` get one assigned by depth-first
    ordinal (``e0``, ``e1``, ...). Duplicated explicit ids are rejected.
    """
    if not isinstance(document, Mapping):
        raise DocumentError("screen document must be an object")
    if "root" not in document:
        raise DocumentError("screen document is missing 'root'", "root")
    return _parse_element(document["root"], "root", counter=[0], seen_ids=set())


def screen_context(document: Mapping[str, Any]) -> AppContext:
    """Read the (package, activity) context of a screen document."""
    package = document.get("package")
    activity = document.get("activity")
    if not isinstance(package, str):
        raise DocumentError("screen document is missing 'package'", "package")
    if not isinstance(activity, str):
        raise DocumentError("screen document is missing 'activity'", "activity")
    return AppContext(package_name=package, activity_name=activity)


def _text_field_document(value: str | HiddenValue | None) -> Any:
    if isinstance(value, HiddenValue):
        return {"hidden": True, "hash": value.hash}
    return value


def element_document(element: UiElement) -> dict[str, Any]:
    """Serialize an element tree back to its document form (canonical key order)."""
    doc: dict[str, Any] = {"id": element.element_id, "class": element.class_name}
    if element.text is not None:
        doc["text"] = _text_field_document(element.text)
    if element.content_description is not None:
        doc["content_desc"] = _text_field_document(element.content_description)
    if element.view_id is not None:
        doc["view_id"] = element.view_id
    doc["bounds"] = list(element.bounds)
    if element.clickable:
        doc["clickable"] = True
    if element.scrollable:
        doc["scrollable"] = True
    if element.focused:
        doc["focused"] = True
    if not element.enabled:
        doc["enabled"] = False
    if element.children:
        doc["children"] = [element_document(c) for c in element.children]
    return doc


def screen_document(root: UiElement, context: AppContext) -> dict[str, Any]:
    return {
        "package": context.package_name,
        "activity": context.activity_name,
        "root": element_document(root),
    }


# ---------------------------------------------------------------------------
# Graph construction
# ---------------------------------------------------------------------------

def _horizontal_overlap(a: UiElement, b: UiElement) -> int:
    return min(a.bounds[2], b.bounds[2]) - max(a.bounds[0], b.bounds[0])


def _vertical_overlap(a: UiElement, b: UiElement) -> int:
    return min(a.bounds[3], b.bounds[3]) - max(a.bounds[1], b.bounds[1])


def sibling_above(a: UiElement, b: UiElement) -> bool:
    """A is above its sibling B: fully higher, with >= 1px horizontal overlap."""
    return a.bounds[3] <= b.bounds[1] and _horizontal_overlap(a, b) >= 1


def sibling_left_of(a: UiElement, b: UiElement) -> bool:
    """A is left of its sibling B: fully lefter, with >= 1px vertical overlap."""
    return a.bounds[2] <= b.bounds[0] and _vertical_overlap(a, b) >= 1


def build_graph(root: UiElement, context: AppContext) -> UiSnapshotGraph:
    """Convert an element tree into its snapshot graph.

    Deterministic: equal trees and contexts produce equal graphs. Hidden
    values surface under the hidden-text predicates with the hash as object,
    never under the plaintext ones. Semantic CONTAINS_PRICE / CONTAINS_DATE
    annotations are included.
    """
    triples: set[Triple] = set()
    order: list[str] = []

    def visit(element: UiElement, parent: UiElement | None):
        eid = element.element_id
        order.append(eid)
        triples.add(Triple(eid, Predicate.HAS_CLASS_NAME, element.class_name))
        if isinstance(element.text, HiddenValue):
            triples.add(Triple(eid, Predicate.HAS_HIDDEN_TEXT, element.text.hash))
        elif element.text is not None:
            triples.add(Triple(eid, Predicate.HAS_TEXT, element.text))
        if isinstance(element.content_description, HiddenValue):
            triples.add(Triple(eid, Predicate.HAS_HIDDEN_CONTENT_DESCRIPTION,
                               element.content_description.hash))
        elif element.content_description is not None:
            triples.add(Triple(eid, Predicate.HAS_CONTENT_DESCRIPTION,
                               element.content_description))
        if element.view_id is not None:
            triples.add(Triple(eid, Predicate.HAS_VIEW_ID, element.view_id))
        location = ",".join(str(v) for v in element.bounds)
        triples.add(Triple(eid, Predicate.HAS_SCREEN_LOCATION, location))
        triples.add(Triple(eid, Predicate.IS_CLICKABLE, _bool_literal(element.clickable)))
        triples.add(Triple(eid, Predicate.IS_SCROLLABLE, _bool_literal(element.scrollable)))
        triples.add(Triple(eid, Predicate.IS_FOCUSED, _bool_literal(element.focused)))
        triples.add(Triple(eid, Predicate.IS_ENABLED, _bool_literal(element.enabled)))
        if parent is not None:
            triples.add(Triple(eid, Predicate.HAS_PARENT, parent.element_id))
            triples.add(Triple(parent.element_id, Predicate.HAS_CHILD, eid))
        for a in element.children:
            for b in element.children:
                if a is b:
                    continue
                if sibling_above(a, b):
                    triples.add(Triple(a.element_id, Predicate.ABOVE, b.element_id))
                    triples.add(Triple(b.element_id, Predicate.BELOW, a.element_id))
                if sibling_left_of(a, b):
                    triples.add(Triple(a.element_id, Predicate.LEFT, b.element_id))
                    triples.add(Triple(b.element_id, Predicate.RIGHT, a.element_id))
        for child in element.children:
            visit(child, element)

    visit(root, None)
    graph = UiSnapshotGraph(context=context, triples=frozenset(triples),
                            root=root.element_id, order=tuple(order))
    return annotate_semantics(graph)


def _bool_literal(value: bool) -> str:
    return "true" if value else "false"


# Price: optional currency symbol, digits with optional thousands separators,
# optional 2-decimal fraction. Dates: MM/DD/YYYY, YYYY-MM-DD, "Month D, YYYY".
PRICE_PATTERN = re.compile(r"[$€£]?(?:\d{1,3}(?:,\d{3})+|\d+)(?:\.\d{2})?")
_MONTHS = ("January|February|March|April|May|June|July"
           "|August|September|October|November|December")
DATE_PATTERNS = (
    re.compile(r"\d{1,2}/\d{1,2}/\d{4}"),
    re.compile(r"\d{4}-\d{2}-\d{2}"),
    re.compile(rf"(?:{_MONTHS}) \d{{1,2}}, \d{{4}}"),
)


def contains_price(text: str) -> bool:
    return PRICE_PATTERN.fullmatch(text) is not None


def contains_date(text: str) -> bool:
    return any(p.fullmatch(text) for p in DATE_PATTERNS)


def annotate_semantics(graph: UiSnapshotGraph) -> UiSnapshotGraph:
    """Add CONTAINS_PRICE / CONTAINS_DATE triples for matching texts. Idempotent."""
    extra: set[Triple] = set()
    for t in graph.triples:
        if t.predicate is Predicate.HAS_TEXT:
            if contains_price(t.obj):
                extra.add(Triple(t.subject, Predicate.CONTAINS_PRICE, t.obj))
            if contains_date(t.obj):
                extra.add(Triple(t.subject, Predicate.CONTAINS_DATE, t.obj))
    if extra <= graph.triples:
        return graph
    return UiSnapshotGraph(context=graph.context,
                           triples=graph.triples | extra,
                           root=graph.root, order=graph.order)


def extract_entries(graph: UiSnapshotGraph) -> set[InfoEntry]:
    """Collect the distinct visible strings of a screen as information entries.

    Whitespace-only strings carry no information and are dropped; duplicate
    strings collapse to one entry.
    """
    entries: set[InfoEntry] = set()
    for t in graph.triples:
        if t.predicate in TEXT_PREDICATES and t.obj.strip():
            entries.add(InfoEntry(context=graph.context, content=t.obj))
    return entries
