"""Data-description queries over snapshot graphs.

A query picks out UI elements by their properties and relations: ``(conj
(class "Button") (text "next"))``, ``(nth 1 (conj (class "TextView") (below
(text "Choose Bank account"))))``. The textual form is an S-expression; it is
what script files store. This module holds the AST, parser, serializer,
evaluator, and the synthesizer that finds an equivalent query avoiding a given
set of strings.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Union

from .errors import QuerySyntaxError, SynthesisError
from .screens import Predicate, UiSnapshotGraph

Query = Union["PropertyEq", "HiddenPropertyEq", "Flag", "Conj", "Rel", "Nth"]

#: Predicates a PropertyEq may test.
PROPERTY_PREDICATES = (
    Predicate.HAS_CLASS_NAME, Predicate.HAS_TEXT,
    Predicate.HAS_CONTENT_DESCRIPTION, Predicate.HAS_VIEW_ID,
)
#: Predicates a hidden slot may stand in for.
HIDDEN_PREDICATES = (Predicate.HAS_TEXT, Predicate.HAS_CONTENT_DESCRIPTION)
FLAG_QUERY_PREDICATES = (
    Predicate.IS_CLICKABLE, Predicate.IS_SCROLLABLE,
    Predicate.IS_FOCUSED, Predicate.IS_ENABLED,
)
REL_QUERY_PREDICATES = (
    Predicate.HAS_PARENT, Predicate.HAS_CHILD,
    Predicate.ABOVE, Predicate.BELOW, Predicate.LEFT, Predicate.RIGHT,
)


@dataclass(frozen=True)
class PropertyEq:
    """Matches elements whose property equals the literal exactly."""

    predicate: Predicate
    value: str

    def __post_init__(self):
        if self.predicate not in PROPERTY_PREDICATES:
            raise ValueError(f"PropertyEq cannot test {self.predicate.name}")


@dataclass(frozen=True)
class HiddenPropertyEq:
    """An obfuscated string slot: the predicate plus the salted hash.

    Matches nothing during local evaluation; it is replaced by a plaintext
    PropertyEq when a shared script is rebuilt on the consumer's device.
    """

    predicate: Predicate
    salted_hash: str

    def __post_init__(self):
        if self.predicate not in HIDDEN_PREDICATES:
            raise ValueError(f"hidden slot cannot stand for {self.predicate.name}")


@dataclass(frozen=True)
class Flag:
    """Matches elements whose boolean property is true."""

    predicate: Predicate

    def __post_init__(self):
        if self.predicate not in FLAG_QUERY_PREDICATES:
            raise ValueError(f"Flag cannot test {self.predicate.name}")


@dataclass(frozen=True)
class Conj:
    terms: tuple[Query, ...]

    def __post_init__(self):
        if len(self.terms) < 2:
            raise ValueError("Conj needs at least two terms")


@dataclass(frozen=True)
class Rel:
    """Matches elements standing in the relation to some match of ``inner``."""

    predicate: Predicate
    inner: Query

    def __post_init__(self):
        if self.predicate not in REL_QUERY_PREDICATES:
            raise ValueError(f"Rel cannot use {self.predicate.name}")


@dataclass(frozen=True)
class Nth:
    """The index-th (1-based) match of ``inner`` in document order."""

    index: int
    inner: Query

    def __post_init__(self):
        if self.index < 1:
            raise ValueError("Nth index is 1-based and must be >= 1")


@dataclass(frozen=True)
class StringRef:
    """Addressable plaintext slot inside a query: where it is and what it says."""

    path: tuple[int, ...]
    predicate: Predicate
    value: str


# ---------------------------------------------------------------------------
# Textual form
# ---------------------------------------------------------------------------

_PROPERTY_KEYWORDS = {
    "class": Predicate.HAS_CLASS_NAME,
    "text": Predicate.HAS_TEXT,
    "content-desc": Predicate.HAS_CONTENT_DESCRIPTION,
    "view-id": Predicate.HAS_VIEW_ID,
}
_HIDDEN_KEYWORDS = {
    "hidden-text": Predicate.HAS_TEXT,
    "hidden-content-desc": Predicate.HAS_CONTENT_DESCRIPTION,
}
_FLAG_KEYWORDS = {
    "clickable": Predicate.IS_CLICKABLE,
    "scrollable": Predicate.IS_SCROLLABLE,
    "focused": Predicate.IS_FOCUSED,
    "enabled": Predicate.IS_ENABLED,
}
_REL_KEYWORDS = {
    "parent": Predicate.HAS_PARENT,
    "child": Predicate.HAS_CHILD,
    "above": Predicate.ABOVE,
    "below": Predicate.BELOW,
    "left": Predicate.LEFT,
    "right": Predicate.RIGHT,
}
_PROPERTY_NAMES = {p: k for k, p in _PROPERTY_KEYWORDS.items()}
_HIDDEN_NAMES = {p: k for k, p in _HIDDEN_KEYWORDS.items()}
_FLAG_NAMES = {p: k for k, p in _FLAG_KEYWORDS.items()}
_REL_NAMES = {p: k for k, p in _REL_KEYWORDS.items()}


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_query(q: Query) -> str:
    """Canonical textual form: single spaces, double-quoted escaped literals."""
    if isinstance(q, PropertyEq):
        return f"({_PROPERTY_NAMES[q.predicate]} {_quote(q.value)})"
    if isinstance(q, HiddenPropertyEq):
        return f"({_HIDDEN_NAMES[q.predicate]} {_quote(q.salted_hash)})"
    if isinstance(q, Flag):
        return f"({_FLAG_NAMES[q.predicate]})"
    if isinstance(q, Conj):
        return "(conj " + " ".join(serialize_query(t) for t in q.terms) + ")"
    if isinstance(q, Rel):
        return f"({_REL_NAMES[q.predicate]} {serialize_query(q.inner)})"
    if isinstance(q, Nth):
        return f"(nth {q.index} {serialize_query(q.inner)})"
    raise TypeError(f"not a query node: {q!r}")


@dataclass(frozen=True)
class _Token:
    kind: str  # "(", ")", "symbol", "string"
    value: str
    position: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c.isspace():
            i += 1
        elif c in "()":
            tokens.append(_Token(c, c, i))
            i += 1
        elif c == '"':
            start = i
            i += 1
            out: list[str] = []
            while True:
                if i >= n:
                    raise QuerySyntaxError("unterminated string literal", start)
                c = text[i]
                if c == "\\":
                    if i + 1 >= n or text[i + 1] not in ('"', "\\"):
                        raise QuerySyntaxError("bad escape in string literal", i)
                    out.append(text[i + 1])
                    i += 2
                elif c == '"':
                    i += 1
                    break
                else:
                    out.append(c)
                    i += 1
            tokens.append(_Token("string", "".join(out), start))
        else:
            start = i
            while i < n and not text[i].isspace() and text[i] not in '()"':
                i += 1
            tokens.append(_Token("symbol", text[start:i], start))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], length: int):
        self.tokens = tokens
        self.pos = 0
        self.length = length

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: str, what: str) -> _Token:
        tok = self.peek()
        if tok is None:
            raise QuerySyntaxError(f"expected {what}, got end of input", self.length)
        if tok.kind != kind:
            raise QuerySyntaxError(f"expected {what}, got {tok.value!r}", tok.position)
        self.pos += 1
        return tok

    def parse_query(self) -> Query:
        self.take("(", "'('")
        head = self.take("symbol", "a keyword")
        name = head.value
        if name in _PROPERTY_KEYWORDS or name in _HIDDEN_KEYWORDS:
            literal = self.take("string", f"a string literal after {name!r}")
            self.take(")", "')'")
            if name in _PROPERTY_KEYWORDS:
                return PropertyEq(_PROPERTY_KEYWORDS[name], literal.value)
            return HiddenPropertyEq(_HIDDEN_KEYWORDS[name], literal.value)
        if name in _FLAG_KEYWORDS:
            self.take(")", "')'")
            return Flag(_FLAG_KEYWORDS[name])
        if name in _REL_KEYWORDS:
            inner = self.parse_query()
            self.take(")", "')'")
            return Rel(_REL_KEYWORDS[name], inner)
        if name == "nth":
            index_tok = self.take("symbol", "an index after 'nth'")
            try:
                index = int(index_tok.value)
            except ValueError:
                raise QuerySyntaxError("nth index must be an integer",
                                       index_tok.position) from None
            if index < 1:
                raise QuerySyntaxError("nth index is 1-based and must be >= 1",
                                       index_tok.position)
            inner = self.parse_query()
            self.take(")", "')'")
            return Nth(index, inner)
        if name == "conj":
            terms: list[Query] = []
            while True:
                tok = self.peek()
                if tok is None:
                    raise QuerySyntaxError("unterminated conj", self.length)
                if tok.kind == ")":
                    break
                terms.append(self.parse_query())
            close = self.take(")", "')'")
            if len(terms) < 2:
                raise QuerySyntaxError("conj needs at least two subqueries",
                                       close.position)
            return Conj(tuple(terms))
        raise QuerySyntaxError(f"unknown keyword {name!r}", head.position)


def parse_query(text: str) -> Query:
    """Parse the textual form. Raises QuerySyntaxError with an offset on bad input."""
    parser = _Parser(_tokenize(text), len(text))
    query = parser.parse_query()
    trailing = parser.peek()
    if trailing is not None:
        raise QuerySyntaxError(f"unexpected trailing {trailing.value!r}",
                               trailing.position)
    return query


# ---------------------------------------------------------------------------
# AST plumbing
# ---------------------------------------------------------------------------

def children(q: Query) -> tuple[Query, ...]:
    if isinstance(q, Conj):
        return q.terms
    if isinstance(q, (Rel, Nth)):
        return (q.inner,)
    return ()


def walk(q: Query, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], Query]]:
    """Yield (path, node) for every node, preorder. Paths are child-index sequences."""
    yield path, q
    for i, child in enumerate(children(q)):
        yield from walk(child, path + (i,))


def node_at(q: Query, path: tuple[int, ...]) -> Query:
    node = q
    for i in path:
        node = children(node)[i]
    return node


def replace_at(q: Query, path: tuple[int, ...], replacement: Query) -> Query:
    """Return a copy of the query with the node at ``path`` swapped out."""
    if not path:
        return replacement
    head, rest = path[0], path[1:]
    if isinstance(q, Conj):
        terms = list(q.terms)
        terms[head] = replace_at(terms[head], rest, replacement)
        return Conj(tuple(terms))
    if isinstance(q, Rel):
        return Rel(q.predicate, replace_at(q.inner, rest, replacement))
    if isinstance(q, Nth):
        return Nth(q.index, replace_at(q.inner, rest, replacement))
    raise IndexError(f"path {path} leaves the query at {q!r}")


def string_refs(q: Query) -> list[StringRef]:
    """Every plaintext string slot (text / content-desc equality) with its path."""
    refs = []
    for path, node in walk(q):
        if isinstance(node, PropertyEq) and node.predicate in HIDDEN_PREDICATES:
            refs.append(StringRef(path, node.predicate, node.value))
    return refs


def hidden_refs(q: Query) -> list[tuple[tuple[int, ...], HiddenPropertyEq]]:
    """Every obfuscated slot with its path, preorder."""
    return [(path, node) for path, node in walk(q)
            if isinstance(node, HiddenPropertyEq)]


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _match_set(q: Query, g: UiSnapshotGraph) -> set[str]:
    if isinstance(q, PropertyEq):
        return {t.subject for t in g.triples
                if t.predicate is q.predicate and t.obj == q.value}
    if isinstance(q, HiddenPropertyEq):
        # Hidden slots carry server-salted hashes; nothing on a local snapshot
        # compares equal to one. Rebuilding replaces them before execution.
        return set()
    if isinstance(q, Flag):
        return {t.subject for t in g.triples
                if t.predicate is q.predicate and t.obj == "true"}
    if isinstance(q, Conj):
        sets = [_match_set(term, g) for term in q.terms]
        return set.intersection(*sets)
    if isinstance(q, Rel):
        inner = _match_set(q.inner, g)
        return {t.subject for t in g.triples
                if t.predicate is q.predicate and t.obj in inner}
    if isinstance(q, Nth):
        ordered = g.in_document_order(_match_set(q.inner, g))
        if len(ordered) >= q.index:
            return {ordered[q.index - 1]}
        return set()
    raise TypeError(f"not a query node: {q!r}")


def evaluate(q: Query, g: UiSnapshotGraph) -> list[str]:
    """All matching entity ids, in document (depth-first) order."""
    return g.in_document_order(_match_set(q, g))


# ---------------------------------------------------------------------------
# Alternative-query synthesis
# ---------------------------------------------------------------------------

_FLAG_PREFERENCE = (
    Predicate.IS_CLICKABLE, Predicate.IS_FOCUSED,
    Predicate.IS_SCROLLABLE, Predicate.IS_ENABLED,
)


def _public_literals(g: UiSnapshotGraph, entity: str,
                     personal: frozenset[str]) -> list[tuple[Predicate, str]]:
    out = []
    for pred in (Predicate.HAS_TEXT, Predicate.HAS_CONTENT_DESCRIPTION):
        for value in g.objects(entity, pred):
            if value not in personal and value.strip():
                out.append((pred, value))
    return out


def _anchored_chains(g: UiSnapshotGraph, target: str,
                     personal: frozenset[str], depth: int,
                     cap: int = 4000) -> list[Query]:
    """Candidates built from a relation chain of exactly ``depth`` hops out of
    the target, ending at a public text anchor.

    Chains follow actual graph edges, so every candidate matches the target;
    uniqueness is the caller's check. Intermediate hops constrain by class
    only.
    """
    out: list[Query] = []
    seen: set[Query] = set()

    def wrap(chain: list[tuple[Predicate, str]], anchor: Query) -> Query:
        sources = [target] + [dst for _, dst in chain[:-1]]
        q = anchor
        for (hop_pred, _), src in zip(reversed(chain), reversed(sources)):
            src_class = g.value(src, Predicate.HAS_CLASS_NAME)
            q = Conj((PropertyEq(Predicate.HAS_CLASS_NAME, src_class),
                      Rel(hop_pred, q)))
        return q

    def rec(entity: str, chain: list[tuple[Predicate, str]], visited: frozenset[str]):
        if len(out) >= cap:
            return
        if len(chain) == depth:
            for pred, value in _public_literals(g, entity, personal):
                q = wrap(chain, PropertyEq(pred, value))
                if q not in seen:
                    seen.add(q)
                    out.append(q)
            return
        for pred in REL_QUERY_PREDICATES:
            for nxt in g.objects(entity, pred):
                if nxt not in visited:
                    rec(nxt, chain + [(pred, nxt)], visited | {nxt})

    rec(target, [], frozenset({target}))
    return out


_MAX_CHAIN_DEPTH = 3


def synthesize_alternative(g: UiSnapshotGraph, target: str,
                           personal: set[str] | frozenset[str]) -> Query:
    """Find the cheapest query that matches exactly ``target`` and mentions no
    personal string.

    Candidate cost order: a unique view id (1); the element's class alone or
    class plus one true flag (2); class anchored to a public text through one
    relation (3); an Nth ordinal over an anchored form (+1); deeper relation
    chains (+1 per hop, at most 3). Ties break on serialized form. Raises
    SynthesisError when nothing in the bounded space matches uniquely.
    """
    personal = frozenset(personal)
    if target not in g.order:
        raise SynthesisError(f"no element {target!r} on this screen")
    target_class = g.value(target, Predicate.HAS_CLASS_NAME)
    assert target_class is not None

    def candidate_groups(cost: int) -> list[list[Query]]:
        """Same-cost candidates, ranked: an Nth ordinal over a shallower
        anchored form beats a deeper relation chain of equal cost."""
        if cost == 1:
            view_id = g.value(target, Predicate.HAS_VIEW_ID)
            if view_id is None:
                return []
            return [[PropertyEq(Predicate.HAS_VIEW_ID, view_id)]]
        if cost == 2:
            found: list[Query] = [PropertyEq(Predicate.HAS_CLASS_NAME, target_class)]
            for flag_pred in _FLAG_PREFERENCE:
                if g.value(target, flag_pred) == "true":
                    found.append(Conj((PropertyEq(Predicate.HAS_CLASS_NAME, target_class),
                                       Flag(flag_pred))))
            return [found]
        groups: list[list[Query]] = []
        chain_depth = cost - 2
        # Ordinals pin one match of a shallower, non-unique anchored form.
        if 1 <= chain_depth - 1 <= _MAX_CHAIN_DEPTH:
            ordinals: list[Query] = []
            for base in _anchored_chains(g, target, personal, chain_depth - 1):
                matches = evaluate(base, g)
                if target in matches and len(matches) > 1:
                    ordinals.append(Nth(matches.index(target) + 1, base))
            groups.append(ordinals)
        if chain_depth <= _MAX_CHAIN_DEPTH:
            groups.append(_anchored_chains(g, target, personal, chain_depth))
        return groups

    for cost in range(1, _MAX_CHAIN_DEPTH + 4):
        for group in candidate_groups(cost):
            unique = [q for q in group if evaluate(q, g) == [target]]
            if unique:
                best = min(unique, key=serialize_query)
                assert evaluate(best, g) == [target]
                assert not {ref.value for ref in string_refs(best)} & personal
                return best

    raise SynthesisError(
        f"no query free of the given strings uniquely matches {target!r}")
