"""GUI automation scripts: what was demonstrated, stored replayably.

A script is an ordered list of blocks. Most blocks are operations (CLICK,
SET_TEXT, ...) carrying a data-description query for their target and the
screen snapshot captured when the author demonstrated the step. IF blocks
branch on conditions over extracted variables. Parameters generalize one
demonstrated menu choice into a list of alternatives.

Scripts serialize to a versioned JSON document; snapshots are stored as
element trees only (their triple graphs are rebuilt on load), and
serialization is canonical so equal scripts produce identical bytes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from enum import Enum
from functools import cached_property
from typing import Any, Iterator, Mapping, Sequence, Union

from .errors import DocumentError, ExecutionError, QuerySyntaxError, RecordingError
from .queries import (
    Conj,
    Flag,
    Nth,
    PropertyEq,
    Query,
    _tokenize,
    evaluate,
    hidden_refs,
    parse_query,
    serialize_query,
    string_refs,
)
from .screens import (
    AppContext,
    HiddenValue,
    Predicate,
    UiElement,
    UiSnapshotGraph,
    build_graph,
    load_screen,
    screen_context,
    screen_document,
)

SCRIPT_VERSION = "pinalite-script/1"
SHARED_VERSION = "pinalite-shared/1"
TRACE_VERSION = "pinalite-trace/1"


class OpKind(str, Enum):
    CLICK = "CLICK"
    LONG_CLICK = "LONG_CLICK"
    SET_TEXT = "SET_TEXT"
    READ_OUT = "READ_OUT"
    EXTRACT_VALUE = "EXTRACT_VALUE"
    PAUSE = "PAUSE"
    LAUNCH = "LAUNCH"


#: Kinds that act on a screen element and so need a query and a snapshot.
ELEMENT_KINDS = frozenset({
    OpKind.CLICK, OpKind.LONG_CLICK, OpKind.SET_TEXT,
    OpKind.READ_OUT, OpKind.EXTRACT_VALUE,
})


@dataclass(frozen=True)
class ScreenSnapshot:
    """The element tree captured with an operation; its graph is derived."""

    context: AppContext
    root: UiElement

    @cached_property
    def graph(self) -> UiSnapshotGraph:
        return build_graph(self.root, self.context)

    def find(self, element_id: str) -> UiElement | None:
        for element in self.root.walk():
            if element.element_id == element_id:
                return element
        return None


# ---------------------------------------------------------------------------
# Conditions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class Literal:
    value: str


@dataclass(frozen=True)
class HiddenLiteral:
    """An obfuscated condition literal; not evaluable without the plaintext."""

    salted_hash: str


Operand = Union[VarRef, Literal, HiddenLiteral]

COMPARATORS = ("=", "!=", "<", ">", "<=", ">=")


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Operand
    right: Operand

    def __post_init__(self):
        if self.op not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.op!r}")


@dataclass(frozen=True)
class BoolOp:
    op: str  # "and" | "or"
    terms: tuple["Condition", ...]

    def __post_init__(self):
        if self.op not in ("and", "or"):
            raise ValueError(f"unknown boolean operator {self.op!r}")
        if len(self.terms) < 2:
            raise ValueError("and/or need at least two terms")


Condition = Union[Comparison, BoolOp]


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'


def serialize_operand(o: Operand) -> str:
    if isinstance(o, VarRef):
        return f"${o.name}"
    if isinstance(o, Literal):
        return _quote(o.value)
    if isinstance(o, HiddenLiteral):
        return f"(hidden {_quote(o.salted_hash)})"
    raise TypeError(o)


def serialize_condition(c: Condition) -> str:
    if isinstance(c, Comparison):
        return f"({c.op} {serialize_operand(c.left)} {serialize_operand(c.right)})"
    if isinstance(c, BoolOp):
        return f"({c.op} " + " ".join(serialize_condition(t) for t in c.terms) + ")"
    raise TypeError(c)


def parse_condition(text: str) -> Condition:
    tokens = _tokenize(text)
    pos = [0]

    def take(kind: str, what: str):
        if pos[0] >= len(tokens):
            raise QuerySyntaxError(f"expected {what}, got end of input", len(text))
        tok = tokens[pos[0]]
        if tok.kind != kind:
            raise QuerySyntaxError(f"expected {what}, got {tok.value!r}", tok.position)
        pos[0] += 1
        return tok

    def peek():
        return tokens[pos[0]] if pos[0] < len(tokens) else None

    def operand() -> Operand:
        tok = peek()
        if tok is None:
            raise QuerySyntaxError("expected an operand, got end of input", len(text))
        if tok.kind == "string":
            pos[0] += 1
            return Literal(tok.value)
        if tok.kind == "symbol" and tok.value.startswith("$") and len(tok.value) > 1:
            pos[0] += 1
            return VarRef(tok.value[1:])
        if tok.kind == "(":
            pos[0] += 1
            head = take("symbol", "'hidden'")
            if head.value != "hidden":
                raise QuerySyntaxError(
                    f"expected 'hidden', got {head.value!r}", head.position)
            literal = take("string", "a hash literal")
            take(")", "')'")
            return HiddenLiteral(literal.value)
        raise QuerySyntaxError(f"expected an operand, got {tok.value!r}", tok.position)

    def condition() -> Condition:
        take("(", "'('")
        head = take("symbol", "a comparator or and/or")
        if head.value in COMPARATORS:
            left = operand()
            right = operand()
            take(")", "')'")
            return Comparison(head.value, left, right)
        if head.value in ("and", "or"):
            terms = []
            while True:
                tok = peek()
                if tok is None:
                    raise QuerySyntaxError("unterminated condition", len(text))
                if tok.kind == ")":
                    break
                terms.append(condition())
            close = take(")", "')'")
            if len(terms) < 2:
                raise QuerySyntaxError("and/or need at least two terms", close.position)
            return BoolOp(head.value, tuple(terms))
        raise QuerySyntaxError(f"unknown operator {head.value!r}", head.position)

    result = condition()
    trailing = peek()
    if trailing is not None:
        raise QuerySyntaxError(f"unexpected trailing {trailing.value!r}",
                               trailing.position)
    return result


def condition_literals(c: Condition, path: tuple[int, ...] = ()
                       ) -> list[tuple[tuple[int, ...], Literal]]:
    """Plaintext literals with their paths (comparison sides are 0 and 1)."""
    if isinstance(c, Comparison):
        out = []
        for i, side in enumerate((c.left, c.right)):
            if isinstance(side, Literal):
                out.append((path + (i,), side))
        return out
    return [item for i, term in enumerate(c.terms)
            for item in condition_literals(term, path + (i,))]


def replace_condition_operand(c: Condition, path: tuple[int, ...],
                              replacement: Operand) -> Condition:
    if isinstance(c, Comparison):
        if path == (0,):
            return Comparison(c.op, replacement, c.right)
        if path == (1,):
            return Comparison(c.op, c.left, replacement)
        raise IndexError(f"no operand at {path}")
    head, rest = path[0], path[1:]
    terms = list(c.terms)
    terms[head] = replace_condition_operand(terms[head], rest, replacement)
    return BoolOp(c.op, tuple(terms))


def _operand_value(o: Operand, env: Mapping[str, str]) -> str:
    if isinstance(o, Literal):
        return o.value
    if isinstance(o, VarRef):
        if o.name not in env:
            raise ExecutionError(f"variable ${o.name} is not set")
        return env[o.name]
    raise ExecutionError("condition compares against an obfuscated literal"
                         " that was never rebuilt")


def eval_condition(c: Condition, env: Mapping[str, str]) -> bool:
    """Strict typing: numeric comparison only when both sides parse as
    decimals, plain string comparison otherwise."""
    if isinstance(c, BoolOp):
        results = (eval_condition(t, env) for t in c.terms)
        return all(results) if c.op == "and" else any(results)
    left = _operand_value(c.left, env)
    right = _operand_value(c.right, env)
    try:
        lv: Any = Decimal(left)
        rv: Any = Decimal(right)
    except InvalidOperation:
        lv, rv = left, right
    if c.op == "=":
        return lv == rv
    if c.op == "!=":
        return lv != rv
    if c.op == "<":
        return lv < rv
    if c.op == ">":
        return lv > rv
    if c.op == "<=":
        return lv <= rv
    return lv >= rv


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Operation:
    kind: OpKind
    target_query: Query | None = None
    alt_query: Query | None = None
    text_arg: str | HiddenValue | None = None
    variable_name: str | None = None
    duration_s: float | None = None
    wait_for_user: bool = False
    app: AppContext | None = None
    snapshot: ScreenSnapshot | None = None

    def __post_init__(self):
        k = self.kind
        if k in ELEMENT_KINDS and self.target_query is None:
            raise DocumentError(f"{k.value} needs a target query")
        # A missing snapshot still executes (queries run on live screens) but
        # cannot be obfuscated for sharing; validate() reports it.
        if k is OpKind.SET_TEXT and self.text_arg is None:
            raise DocumentError("SET_TEXT needs a text argument")
        if k is OpKind.EXTRACT_VALUE and not self.variable_name:
            raise DocumentError("EXTRACT_VALUE needs a variable name")
        if k is OpKind.PAUSE and not self.wait_for_user:
            if self.duration_s is None or self.duration_s <= 0:
                raise DocumentError("PAUSE needs a positive duration or wait_for_user")
        if k is OpKind.LAUNCH and self.app is None:
            raise DocumentError("LAUNCH needs an app context")


@dataclass(frozen=True)
class Conditional:
    condition: Condition
    then_block: tuple["Block", ...]
    else_block: tuple["Block", ...] | None = None

    def __post_init__(self):
        if not self.then_block:
            raise DocumentError("IF needs a non-empty then branch")


Block = Union[Operation, Conditional]


@dataclass(frozen=True)
class Parameter:
    """One demonstrated choice generalized to a menu of alternatives.

    Values may be hidden markers in an obfuscated script.
    """

    name: str
    bound_op: int
    possible_values: tuple[str | HiddenValue, ...]

    def __post_init__(self):
        if not self.name:
            raise DocumentError("parameter name must be non-empty")
        if not self.possible_values:
            raise DocumentError(f"parameter {self.name!r} has no possible values")

    def plain_values(self) -> list[str]:
        return [v for v in self.possible_values if isinstance(v, str)]


@dataclass(frozen=True)
class Script:
    name: str
    blocks: tuple[Block, ...]
    parameters: tuple[Parameter, ...] = ()

    def __post_init__(self):
        if not self.blocks:
            raise DocumentError("script has no blocks")


def walk_blocks(blocks: Sequence[Block], start: int = 0
                ) -> Iterator[tuple[int, Block]]:
    """Flat pre-order indexing over all blocks, descending into IF branches."""
    index = start
    for block in blocks:
        yield index, block
        index += 1
        if isinstance(block, Conditional):
            nested = list(walk_blocks(block.then_block, index))
            yield from nested
            index += len(nested)
            if block.else_block:
                nested = list(walk_blocks(block.else_block, index))
                yield from nested
                index += len(nested)


def block_at(script: Script, index: int) -> Block:
    for i, block in walk_blocks(script.blocks):
        if i == index:
            return block
    raise IndexError(f"no block {index}")


def operations(script: Script) -> list[tuple[int, Operation]]:
    return [(i, b) for i, b in walk_blocks(script.blocks)
            if isinstance(b, Operation)]


# ---------------------------------------------------------------------------
# Recording
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DemoEvent:
    """One demonstrated step; screen and target are present for element actions."""

    kind: OpKind
    screen: ScreenSnapshot | None = None
    target_id: str | None = None
    typed_text: str | None = None
    variable_name: str | None = None
    menu_choice: bool = False
    parameter_name: str | None = None
    duration_s: float | None = None
    wait_for_user: bool = False
    app: AppContext | None = None


_RECORDING_FLAGS = (
    Predicate.IS_CLICKABLE, Predicate.IS_FOCUSED,
    Predicate.IS_SCROLLABLE, Predicate.IS_ENABLED,
)


def describe_element(g: UiSnapshotGraph, target: str) -> Query:
    """Default data description for a demonstrated target.

    Class plus visible text when that pins the element down; a unique view id
    next; class plus a true flag, with an ordinal if several match. Flags are
    tried in a fixed preference order so recordings are reproducible.
    """
    target_class = g.value(target, Predicate.HAS_CLASS_NAME)
    text = g.value(target, Predicate.HAS_TEXT)
    if text is not None and text.strip():
        q: Query = Conj((PropertyEq(Predicate.HAS_CLASS_NAME, target_class),
                         PropertyEq(Predicate.HAS_TEXT, text)))
        if evaluate(q, g) == [target]:
            return q
    view_id = g.value(target, Predicate.HAS_VIEW_ID)
    if view_id is not None:
        q = PropertyEq(Predicate.HAS_VIEW_ID, view_id)
        if evaluate(q, g) == [target]:
            return q
    for flag in _RECORDING_FLAGS:
        if g.value(target, flag) != "true":
            continue
        q = Conj((PropertyEq(Predicate.HAS_CLASS_NAME, target_class), Flag(flag)))
        matches = evaluate(q, g)
        if matches == [target]:
            return q
        if target in matches:
            return Nth(matches.index(target) + 1, q)
    raise RecordingError(
        f"element {target!r} has no unambiguous description on this screen")


def _menu_sibling_texts(snapshot: ScreenSnapshot, target_id: str) -> list[str]:
    """Texts of the chosen element's same-class siblings, in menu order."""
    target = snapshot.find(target_id)
    assert target is not None
    for element in snapshot.root.walk():
        if any(child.element_id == target_id for child in element.children):
            return [child.text for child in element.children
                    if child.class_name == target.class_name
                    and isinstance(child.text, str) and child.text.strip()]
    return [target.text] if isinstance(target.text, str) else []


def record_from_trace(trace: Sequence[DemoEvent], name: str) -> Script:
    """Turn a demonstration into a script, one operation per event.

    Menu-choice events also yield a parameter whose possible values are the
    chosen element's sibling texts (the chosen one included).
    """
    if not trace:
        raise RecordingError("empty demonstration")
    blocks: list[Block] = []
    parameters: list[Parameter] = []
    for index, event in enumerate(trace):
        if event.kind in ELEMENT_KINDS:
            if event.screen is None or event.target_id is None:
                raise RecordingError(
                    f"event {index}: {event.kind.value} without screen or target")
            g = event.screen.graph
            if event.target_id not in g.order:
                raise RecordingError(
                    f"event {index}: no element {event.target_id!r} on its screen")
            query = describe_element(g, event.target_id)
            op = Operation(
                kind=event.kind,
                target_query=query,
                text_arg=event.typed_text if event.kind is OpKind.SET_TEXT else None,
                variable_name=event.variable_name,
                snapshot=event.screen,
            )
            if event.menu_choice:
                values = _menu_sibling_texts(event.screen, event.target_id)
                chosen = {ref.value for ref in string_refs(query)
                          if ref.predicate is Predicate.HAS_TEXT}
                if not chosen & set(values):
                    raise RecordingError(
                        f"event {index}: menu choice is not described by its text,"
                        " cannot parameterize")
                parameters.append(Parameter(
                    name=event.parameter_name or f"choice{index}",
                    bound_op=index,
                    possible_values=tuple(values)))
        elif event.kind is OpKind.PAUSE:
            op = Operation(kind=OpKind.PAUSE, duration_s=event.duration_s,
                           wait_for_user=event.wait_for_user)
        elif event.kind is OpKind.LAUNCH:
            if event.app is None:
                raise RecordingError(f"event {index}: LAUNCH without an app")
            op = Operation(kind=OpKind.LAUNCH, app=event.app)
        else:  # pragma: no cover - OpKind is closed
            raise RecordingError(f"event {index}: unsupported kind {event.kind}")
        blocks.append(op)
    return Script(name=name, blocks=tuple(blocks), parameters=tuple(parameters))


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------

def _text_arg_document(value: str | HiddenValue) -> Any:
    if isinstance(value, HiddenValue):
        return {"hidden": True, "hash": value.hash}
    return value


def _operation_document(op: Operation, shared: bool) -> dict[str, Any]:
    doc: dict[str, Any] = {"type": "op", "kind": op.kind.value}
    if op.target_query is not None:
        doc["target_query"] = serialize_query(op.target_query)
    if shared and op.kind in ELEMENT_KINDS:
        doc["alt_query"] = (serialize_query(op.alt_query)
                            if op.alt_query is not None else None)
    elif op.alt_query is not None:
        doc["alt_query"] = serialize_query(op.alt_query)
    if op.text_arg is not None:
        doc["text_arg"] = _text_arg_document(op.text_arg)
    if op.variable_name is not None:
        doc["variable_name"] = op.variable_name
    if op.duration_s is not None:
        doc["duration_s"] = op.duration_s
    if op.wait_for_user:
        doc["wait_for_user"] = True
    if op.app is not None:
        doc["app"] = {"package": op.app.package_name,
                      "activity": op.app.activity_name}
    if op.snapshot is not None:
        doc["snapshot"] = screen_document(op.snapshot.root, op.snapshot.context)
    return doc


def _block_document(block: Block, shared: bool) -> dict[str, Any]:
    if isinstance(block, Operation):
        return _operation_document(block, shared)
    doc: dict[str, Any] = {
        "type": "if",
        "condition": serialize_condition(block.condition),
        "then": [_block_document(b, shared) for b in block.then_block],
    }
    if block.else_block is not None:
        doc["else"] = [_block_document(b, shared) for b in block.else_block]
    return doc


def serialize_script(script: Script, shared: bool = False) -> dict[str, Any]:
    return {
        "version": SHARED_VERSION if shared else SCRIPT_VERSION,
        "name": script.name,
        "blocks": [_block_document(b, shared) for b in script.blocks],
        "parameters": [
            {"name": p.name, "bound_op": p.bound_op,
             "possible_values": [_text_arg_document(v) for v in p.possible_values]}
            for p in script.parameters],
    }


def script_to_json(script: Script, shared: bool = False) -> str:
    return json.dumps(serialize_script(script, shared),
                      indent=2, ensure_ascii=False) + "\n"


_OP_KEYS = {"type", "kind", "target_query", "alt_query", "text_arg",
            "variable_name", "duration_s", "wait_for_user", "app", "snapshot"}


def _parse_query_field(text: Any, path: str) -> Query:
    if not isinstance(text, str):
        raise DocumentError("query must be a string", path)
    try:
        return parse_query(text)
    except QuerySyntaxError as err:
        raise DocumentError(f"bad query ({err})", path) from None


def _parse_operation(doc: Mapping[str, Any], path: str) -> Operation:
    unknown = set(doc) - _OP_KEYS
    if unknown:
        raise DocumentError(f"unknown operation fields {sorted(unknown)}", path)
    kind_name = doc.get("kind")
    try:
        kind = OpKind(kind_name)
    except ValueError:
        raise DocumentError(f"unknown kind {kind_name!r}", f"{path}.kind") from None

    target_query = alt_query = None
    if "target_query" in doc:
        target_query = _parse_query_field(doc["target_query"], f"{path}.target_query")
    if doc.get("alt_query") is not None:
        alt_query = _parse_query_field(doc["alt_query"], f"{path}.alt_query")

    text_arg: str | HiddenValue | None = None
    raw_text = doc.get("text_arg")
    if isinstance(raw_text, str):
        text_arg = raw_text
    elif isinstance(raw_text, Mapping) and raw_text.get("hidden") is True:
        if not isinstance(raw_text.get("hash"), str):
            raise DocumentError("hidden text_arg needs a string hash",
                                f"{path}.text_arg")
        text_arg = HiddenValue(raw_text["hash"])
    elif raw_text is not None:
        raise DocumentError("text_arg must be a string or hidden marker",
                            f"{path}.text_arg")

    app = None
    if doc.get("app") is not None:
        raw_app = doc["app"]
        if (not isinstance(raw_app, Mapping)
                or not isinstance(raw_app.get("package"), str)
                or not isinstance(raw_app.get("activity"), str)):
            raise DocumentError("app needs package and activity", f"{path}.app")
        app = AppContext(raw_app["package"], raw_app["activity"])

    snapshot = None
    if doc.get("snapshot") is not None:
        raw_snap = doc["snapshot"]
        try:
            snapshot = ScreenSnapshot(context=screen_context(raw_snap),
                                      root=load_screen(raw_snap))
        except DocumentError as err:
            raise DocumentError(str(err), f"{path}.snapshot") from None

    duration = doc.get("duration_s")
    if duration is not None and not isinstance(duration, (int, float)):
        raise DocumentError("duration_s must be a number", f"{path}.duration_s")

    try:
        return Operation(
            kind=kind, target_query=target_query, alt_query=alt_query,
            text_arg=text_arg, variable_name=doc.get("variable_name"),
            duration_s=duration, wait_for_user=bool(doc.get("wait_for_user", False)),
            app=app, snapshot=snapshot)
    except DocumentError as err:
        raise DocumentError(str(err), path) from None


def _parse_block(doc: Any, path: str) -> Block:
    if not isinstance(doc, Mapping):
        raise DocumentError("block must be an object", path)
    block_type = doc.get("type")
    if block_type == "op":
        return _parse_operation(doc, path)
    if block_type == "if":
        try:
            condition = parse_condition(doc.get("condition", ""))
        except QuerySyntaxError as err:
            raise DocumentError(f"bad condition ({err})", f"{path}.condition") from None
        raw_then = doc.get("then")
        if not isinstance(raw_then, list) or not raw_then:
            raise DocumentError("if needs a non-empty then list", f"{path}.then")
        then_block = tuple(_parse_block(b, f"{path}.then[{i}]")
                           for i, b in enumerate(raw_then))
        else_block = None
        if doc.get("else") is not None:
            raw_else = doc["else"]
            if not isinstance(raw_else, list):
                raise DocumentError("else must be a list", f"{path}.else")
            else_block = tuple(_parse_block(b, f"{path}.else[{i}]")
                               for i, b in enumerate(raw_else))
        return Conditional(condition=condition, then_block=then_block,
                           else_block=else_block)
    raise DocumentError(f"unknown block type {block_type!r}", f"{path}.type")


def deserialize_script(doc: Mapping[str, Any]) -> Script:
    """Parse a script document of either version (plain or shared)."""
    if not isinstance(doc, Mapping):
        raise DocumentError("script document must be an object")
    version = doc.get("version")
    if version not in (SCRIPT_VERSION, SHARED_VERSION):
        raise DocumentError(f"unsupported version {version!r}", "version")
    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise DocumentError("script needs a non-empty name", "name")
    raw_blocks = doc.get("blocks")
    if not isinstance(raw_blocks, list) or not raw_blocks:
        raise DocumentError("script needs a non-empty blocks list", "blocks")
    blocks = tuple(_parse_block(b, f"blocks[{i}]") for i, b in enumerate(raw_blocks))

    parameters = []
    raw_params = doc.get("parameters", [])
    if not isinstance(raw_params, list):
        raise DocumentError("parameters must be a list", "parameters")
    for i, raw in enumerate(raw_params):
        path = f"parameters[{i}]"
        if (not isinstance(raw, Mapping) or not isinstance(raw.get("name"), str)
                or not isinstance(raw.get("bound_op"), int)
                or not isinstance(raw.get("possible_values"), list)):
            raise DocumentError(
                "parameter needs name, bound_op and possible_values", path)
        values: list[str | HiddenValue] = []
        for j, v in enumerate(raw["possible_values"]):
            if isinstance(v, str):
                values.append(v)
            elif isinstance(v, Mapping) and v.get("hidden") is True and isinstance(v.get("hash"), str):
                values.append(HiddenValue(v["hash"]))
            else:
                raise DocumentError("possible value must be a string or hidden"
                                    " marker", f"{path}.possible_values[{j}]")
        try:
            parameters.append(Parameter(
                name=raw["name"], bound_op=raw["bound_op"],
                possible_values=tuple(values)))
        except DocumentError as err:
            raise DocumentError(str(err), path) from None
    return Script(name=name, blocks=blocks, parameters=tuple(parameters))


def is_shared_document(doc: Mapping[str, Any]) -> bool:
    return doc.get("version") == SHARED_VERSION


# ---------------------------------------------------------------------------
# Validation findings
# ---------------------------------------------------------------------------

def validate(script: Script) -> list[str]:
    """Invariant check on a deserialized script; findings, not exceptions."""
    findings: list[str] = []
    indexed = dict(walk_blocks(script.blocks))
    declared: set[str] = set()
    for index, block in sorted(indexed.items()):
        if isinstance(block, Operation):
            if block.kind in ELEMENT_KINDS and block.snapshot is None:
                findings.append(
                    f"block {index}: {block.kind.value} has no snapshot,"
                    " so it cannot be shared")
            if block.kind is OpKind.EXTRACT_VALUE and block.variable_name:
                declared.add(block.variable_name)
        else:
            for _, ref in _condition_vars(block.condition):
                if ref not in declared and ref not in {p.name for p in script.parameters}:
                    findings.append(
                        f"block {index}: condition references ${ref},"
                        " never extracted or declared as a parameter")
    for p in script.parameters:
        block = indexed.get(p.bound_op)
        if block is None:
            findings.append(f"parameter {p.name!r}: bound_op {p.bound_op} out of range")
            continue
        if not isinstance(block, Operation) or block.kind not in ELEMENT_KINDS:
            findings.append(
                f"parameter {p.name!r}: bound to block {p.bound_op},"
                " which does not target an element")
            continue
        assert block.target_query is not None
        # Holds pre-obfuscation only: once slots or values are hidden the
        # plaintext linkage is gone by design.
        hidden = (any(isinstance(v, HiddenValue) for v in p.possible_values)
                  or hidden_refs(block.target_query))
        if not hidden:
            texts = {ref.value for ref in string_refs(block.target_query)
                     if ref.predicate is Predicate.HAS_TEXT}
            if not texts & set(p.plain_values()):
                findings.append(
                    f"parameter {p.name!r}: operation {p.bound_op} query mentions"
                    " none of its possible values")
    return findings


def _condition_vars(c: Condition) -> list[tuple[tuple[int, ...], str]]:
    if isinstance(c, Comparison):
        return [((i,), side.name) for i, side in enumerate((c.left, c.right))
                if isinstance(side, VarRef)]
    return [(p, v) for i, term in enumerate(c.terms)
            for p, v in _condition_vars(term)]


# ---------------------------------------------------------------------------
# Demonstration traces on disk
# ---------------------------------------------------------------------------

def demo_trace_document(events: Sequence[DemoEvent]) -> dict[str, Any]:
    """Store a demonstration so `record` can replay it into a script."""
    out = []
    for e in events:
        rec: dict[str, Any] = {"kind": e.kind.value}
        if e.screen is not None:
            rec["screen"] = screen_document(e.screen.root, e.screen.context)
        if e.target_id is not None:
            rec["target_id"] = e.target_id
        if e.typed_text is not None:
            rec["typed_text"] = e.typed_text
        if e.variable_name is not None:
            rec["variable_name"] = e.variable_name
        if e.menu_choice:
            rec["menu_choice"] = True
        if e.parameter_name is not None:
            rec["parameter_name"] = e.parameter_name
        if e.duration_s is not None:
            rec["duration_s"] = e.duration_s
        if e.wait_for_user:
            rec["wait_for_user"] = True
        if e.app is not None:
            rec["app"] = {"package": e.app.package_name,
                          "activity": e.app.activity_name}
        out.append(rec)
    return {"version": TRACE_VERSION, "events": out}


def load_demo_trace(doc: Mapping[str, Any]) -> list[DemoEvent]:
    if not isinstance(doc, Mapping) or doc.get("version") != TRACE_VERSION:
        raise DocumentError(f"not a demo trace document (version "
                            f"{TRACE_VERSION!r} required)")
    raw_events = doc.get("events")
    if not isinstance(raw_events, list):
        raise DocumentError("events must be a list")
    events = []
    for i, rec in enumerate(raw_events):
        where = f"events[{i}]"
        if not isinstance(rec, Mapping):
            raise DocumentError(f"{where} must be an object")
        try:
            kind = OpKind(rec.get("kind"))
        except ValueError:
            raise DocumentError(f"{where}.kind {rec.get('kind')!r} is not an "
                                f"action") from None
        screen = None
        if "screen" in rec:
            raw = rec["screen"]
            screen = ScreenSnapshot(context=screen_context(raw),
                                    root=load_screen(raw))
        app = None
        if "app" in rec:
            raw = rec["app"]
            if not isinstance(raw, Mapping) or "package" not in raw \
                    or "activity" not in raw:
                raise DocumentError(f"{where}.app needs package and activity")
            app = AppContext(raw["package"], raw["activity"])
        try:
            events.append(DemoEvent(
                kind=kind, screen=screen,
                target_id=rec.get("target_id"),
                typed_text=rec.get("typed_text"),
                variable_name=rec.get("variable_name"),
                menu_choice=bool(rec.get("menu_choice", False)),
                parameter_name=rec.get("parameter_name"),
                duration_s=rec.get("duration_s"),
                wait_for_user=bool(rec.get("wait_for_user", False)),
                app=app))
        except (TypeError, ValueError) as exc:
            raise DocumentError(f"{where}: {exc}") from None
    return events
