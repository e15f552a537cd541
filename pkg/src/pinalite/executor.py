"""Runs scripts against a simulated app, rebuilding hidden slots on the way.

The consumer-side half of sharing: when a query carries hidden hashes (or no
longer matches), the alternative query locates the element on the consumer's
own screen, and the plaintext found there is substituted back into the
script. The executor never needs the server or the salt.
"""

from dataclasses import dataclass, replace
from enum import Enum

from .errors import ExecutionError
from .queries import PropertyEq, evaluate, hidden_refs, replace_at, string_refs
from .screens import HiddenValue, Predicate, UiSnapshotGraph
from .scripting import (
    ELEMENT_KINDS,
    Block,
    Conditional,
    OpKind,
    Operation,
    Parameter,
    Script,
    _menu_sibling_texts,
    eval_condition,
)
from .apps import SimulatedApp

DEFAULT_SCREEN_THRESHOLD = 0.6

# Predicates that describe layout identity rather than content; texts are
# excluded on purpose since they differ across users or arrive hashed.
_STRUCTURAL = frozenset({
    Predicate.HAS_CLASS_NAME,
    Predicate.HAS_VIEW_ID,
    Predicate.HAS_PARENT,
    Predicate.HAS_CHILD,
    Predicate.IS_CLICKABLE,
    Predicate.IS_SCROLLABLE,
    Predicate.IS_FOCUSED,
    Predicate.IS_ENABLED,
})


@dataclass(frozen=True)
class ScreenMatch:
    same_screen: bool
    similarity: float


def screen_match(current: UiSnapshotGraph, stored: UiSnapshotGraph,
                 threshold: float = DEFAULT_SCREEN_THRESHOLD) -> ScreenMatch:
    """Jaccard similarity over structural triples, gated on equal contexts."""
    a = {t for t in current.triples if t.predicate in _STRUCTURAL}
    b = {t for t in stored.triples if t.predicate in _STRUCTURAL}
    if not a and not b:
        similarity = 1.0
    else:
        similarity = len(a & b) / len(a | b)
    same = current.context == stored.context and similarity >= threshold
    return ScreenMatch(same_screen=same, similarity=similarity)


class FailureKind(Enum):
    NO_MATCH = "no-match"
    AMBIGUOUS = "ambiguous"
    WRONG_SCREEN = "wrong-screen"


@dataclass(frozen=True)
class ExecEvent:
    op_index: int
    kind: OpKind
    element_id: str | None = None
    failure: FailureKind | None = None
    similarity: float | None = None
    # (old spelling, consumer plaintext) per substituted slot
    rebuilt: tuple[tuple[str, str], ...] = ()
    detail: str | None = None


@dataclass(frozen=True)
class ExecutionTrace:
    events: tuple[ExecEvent, ...]
    final_screen: str

    @property
    def ok(self) -> bool:
        return all(e.failure is None for e in self.events)

    def element_sequence(self) -> list[str]:
        return [e.element_id for e in self.events if e.element_id is not None]


def _block_span(block: Block) -> int:
    if isinstance(block, Conditional):
        span = 1 + sum(_block_span(b) for b in block.then_block)
        if block.else_block:
            span += sum(_block_span(b) for b in block.else_block)
        return span
    return 1


def _map_operations(blocks, fn, base: int = 0) -> tuple:
    """Structure-preserving rewrite keeping flat block indices aligned."""
    out = []
    index = base
    for block in blocks:
        if isinstance(block, Conditional):
            then_base = index + 1
            then = _map_operations(block.then_block, fn, then_base)
            else_base = then_base + sum(_block_span(b) for b in block.then_block)
            orelse = _map_operations(block.else_block, fn, else_base) \
                if block.else_block else None
            out.append(Conditional(block.condition, then, orelse))
        else:
            out.append(fn(index, block))
        index += _block_span(block)
    return tuple(out)


def substitute_parameter(script: Script, name: str, value: str) -> Script:
    """Point the bound operation's query at a different menu option."""
    for param in script.parameters:
        if param.name == name:
            break
    else:
        raise ExecutionError(f"script has no parameter {name!r}")
    allowed = param.plain_values()
    if len(allowed) != len(param.possible_values):
        raise ExecutionError(
            f"parameter {name!r} still has hidden values; rebuild it first")
    if value not in allowed:
        raise ExecutionError(
            f"{value!r} is not one of {allowed} for parameter {name!r}")

    choices = set(allowed)

    def rewrite(index: int, op):
        if index != param.bound_op or not isinstance(op, Operation):
            return op
        q = op.target_query
        hit = False
        for ref in string_refs(q):
            if ref.value in choices:
                q = replace_at(q, ref.path, PropertyEq(ref.predicate, value))
                hit = True
        if not hit:
            raise ExecutionError(
                f"parameter {name!r} does not appear in the query of block "
                f"{index}")
        return replace(op, target_query=q)

    blocks = _map_operations(script.blocks, rewrite)
    return Script(script.name, blocks, script.parameters)


def execute(script: Script, app: SimulatedApp,
            params: dict[str, str] | None = None,
            screen_threshold: float = DEFAULT_SCREEN_THRESHOLD
            ) -> tuple[ExecutionTrace, Script]:
    """Step the script through the app's screen state machine.

    Returns the trace and the rebuilt script. The rebuilt script carries any
    plaintext recovered through alternative queries (with alt_query dropped
    where it is no longer needed) and regenerated parameter values; the input
    script is never modified.
    """
    for pname, value in (params or {}).items():
        script = substitute_parameter(script, pname, value)

    events: list[ExecEvent] = []
    env: dict[str, str] = {}
    rebuilt_queries: dict[int, object] = {}
    regenerated: dict[str, tuple[str, ...]] = {}
    state = {"screen": app.initial}

    def fail(index: int, op: Operation, kind: FailureKind,
             similarity: float | None = None, detail: str | None = None):
        events.append(ExecEvent(op_index=index, kind=op.kind, failure=kind,
                                similarity=similarity, detail=detail))

    def step(index: int, op: Operation) -> bool:
        if op.kind is OpKind.LAUNCH:
            if op.app.package_name != app.package:
                raise ExecutionError(
                    f"script launches {op.app.package_name!r} but the app is "
                    f"{app.package!r}")
            state["screen"] = app.initial
            events.append(ExecEvent(op_index=index, kind=op.kind,
                                    detail=app.initial))
            return True
        if op.kind is OpKind.PAUSE:
            detail = "wait for user" if op.wait_for_user \
                else f"{op.duration_s:g}s"
            events.append(ExecEvent(op_index=index, kind=op.kind,
                                    detail=detail))
            return True

        if op.kind is OpKind.SET_TEXT and isinstance(op.text_arg, HiddenValue):
            fail(index, op, FailureKind.NO_MATCH,
                 detail="hidden text argument has no local value")
            return False

        snap = app.screens[state["screen"]]
        graph = snap.graph
        if op.snapshot is not None:
            verdict = screen_match(graph, op.snapshot.graph, screen_threshold)
            if not verdict.same_screen:
                fail(index, op, FailureKind.WRONG_SCREEN,
                     similarity=verdict.similarity,
                     detail=f"on {state['screen']!r}")
                return False

        hidden = hidden_refs(op.target_query)
        matches = [] if hidden else evaluate(op.target_query, graph)
        rebuilt_pairs: tuple[tuple[str, str], ...] = ()
        if len(matches) == 1:
            target = matches[0]
        else:
            if op.alt_query is None:
                kind = FailureKind.AMBIGUOUS if len(matches) > 1 \
                    else FailureKind.NO_MATCH
                fail(index, op, kind, detail="no alternative query")
                return False
            alt_matches = evaluate(op.alt_query, graph)
            if len(alt_matches) != 1:
                kind = FailureKind.AMBIGUOUS if len(alt_matches) > 1 \
                    else FailureKind.NO_MATCH
                fail(index, op, kind,
                     detail=f"alternative query matched {len(alt_matches)}")
                return False
            target = alt_matches[0]
            element = snap.find(target)
            new_q = op.target_query
            pairs = []
            for path, node in hidden:
                value = element.text \
                    if node.predicate is Predicate.HAS_TEXT \
                    else element.content_description
                if not isinstance(value, str):
                    fail(index, op, FailureKind.NO_MATCH,
                         detail=f"element {target!r} has no plaintext for "
                                f"{node.predicate.value}")
                    return False
                new_q = replace_at(new_q, path,
                                   PropertyEq(node.predicate, value))
                pairs.append((node.salted_hash, value))
            # refresh stale plaintext terms so the rebuilt query holds here
            for ref in string_refs(new_q):
                actual = element.text \
                    if ref.predicate is Predicate.HAS_TEXT \
                    else element.content_description
                if isinstance(actual, str) and actual != ref.value:
                    new_q = replace_at(new_q, ref.path,
                                       PropertyEq(ref.predicate, actual))
                    pairs.append((ref.value, actual))
            rebuilt_queries[index] = new_q
            rebuilt_pairs = tuple(pairs)
            for param in script.parameters:
                if param.bound_op == index:
                    regenerated[param.name] = tuple(
                        _menu_sibling_texts(snap, target))

        element = snap.find(target)
        if op.kind is OpKind.EXTRACT_VALUE:
            if not isinstance(element.text, str):
                fail(index, op, FailureKind.NO_MATCH,
                     detail=f"element {target!r} has no text to extract")
                return False
            env[op.variable_name] = element.text
        detail = None
        if op.kind is OpKind.READ_OUT and isinstance(element.text, str):
            detail = element.text
        if op.kind is OpKind.SET_TEXT:
            detail = op.text_arg
        events.append(ExecEvent(op_index=index, kind=op.kind,
                                element_id=target, rebuilt=rebuilt_pairs,
                                detail=detail))
        nxt = app.transitions.get((state["screen"], target, op.kind))
        if nxt is not None:
            state["screen"] = nxt
        return True

    def run(blocks, base: int) -> bool:
        index = base
        for block in blocks:
            if isinstance(block, Conditional):
                taken = eval_condition(block.condition, env)
                then_base = index + 1
                if taken:
                    if not run(block.then_block, then_base):
                        return False
                elif block.else_block:
                    else_base = then_base + sum(
                        _block_span(b) for b in block.then_block)
                    if not run(block.else_block, else_base):
                        return False
            else:
                if not step(index, block):
                    return False
            index += _block_span(block)
        return True

    run(script.blocks, 0)

    def apply_rebuild(index: int, op):
        if not isinstance(op, Operation):
            return op
        changes = {}
        if index in rebuilt_queries:
            changes = {"target_query": rebuilt_queries[index],
                       "alt_query": None}
        return replace(op, **changes) if changes else op

    new_params = tuple(
        Parameter(p.name, p.bound_op, regenerated[p.name])
        if p.name in regenerated else p
        for p in script.parameters)
    rebuilt = Script(script.name,
                     _map_operations(script.blocks, apply_rebuild),
                     new_params)
    return ExecutionTrace(events=tuple(events),
                          final_screen=state["screen"]), rebuilt
