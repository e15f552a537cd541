"""Turning a recorded script into a shareable one.

Pipeline: scan every string slot, classify the deduplicated entries through
the aggregation server, let the author override verdicts, then replace each
personal slot with its salted hash and attach alternative queries so the
consumer's device can still find the elements.  The final serialized output
is swept byte-by-byte for any personal plaintext; a hit aborts the share.
"""

import dataclasses
import json
from dataclasses import dataclass
from enum import Enum

from .client import AggregationClient
from .errors import DocumentError, LeakDetected, SynthesisError
from .hashing import salted_hash  # noqa: F401  (re-exported for harness checks)
from .queries import (
    HiddenPropertyEq,
    evaluate,
    replace_at,
    string_refs,
    synthesize_alternative,
)
from .screens import AppContext, HiddenValue, UiElement
from .scripting import (
    ELEMENT_KINDS,
    Conditional,
    HiddenLiteral,
    OpKind,
    Operation,
    Parameter,
    ScreenSnapshot,
    Script,
    condition_literals,
    replace_condition_operand,
    script_to_json,
    serialize_script,
    walk_blocks,
)


class LeakKind(Enum):
    QUERY_STRING = "query-string"
    PARAMETER_VALUE = "parameter-value"
    SNAPSHOT_TEXT = "snapshot-text"
    CONDITION_LITERAL = "condition-literal"


@dataclass(frozen=True)
class EntryLocation:
    """One string slot in the script document.

    detail disambiguates within the block: a query path, a parameter value
    index, an element id, or a condition operand path.
    """

    kind: LeakKind
    block_index: int
    detail: tuple

    def document(self) -> dict:
        return {"kind": self.kind.value, "block_index": self.block_index,
                "detail": list(self.detail)}


@dataclass(frozen=True)
class ClassifiedEntry:
    entry_id: int
    context: AppContext
    content: str
    locations: tuple[EntryLocation, ...]
    f: int
    g: int
    p_value: float
    verdict_public: bool
    salted_hash: str
    override: bool | None = None

    @property
    def final_public(self) -> bool:
        return self.override if self.override is not None else self.verdict_public


@dataclass(frozen=True)
class ObfuscationReport:
    script_name: str
    entries: tuple[ClassifiedEntry, ...]

    def entry(self, entry_id: int) -> ClassifiedEntry:
        for e in self.entries:
            if e.entry_id == entry_id:
                return e
        raise LookupError(f"no entry {entry_id} in this report")

    @property
    def counts(self) -> dict[str, int]:
        public = sum(1 for e in self.entries if e.final_public)
        return {"public": public, "personal": len(self.entries) - public}


def _blank(s: str) -> bool:
    return not s.strip()


def _scan_with_content(script: Script) -> list[tuple[EntryLocation, str]]:
    found: list[tuple[EntryLocation, str]] = []
    for index, block in walk_blocks(script.blocks):
        if isinstance(block, Conditional):
            for path, lit in condition_literals(block.condition):
                if not _blank(lit.value):
                    found.append((EntryLocation(LeakKind.CONDITION_LITERAL,
                                                index, ("condition", *path)),
                                  lit.value))
            continue
        if block.target_query is not None:
            for ref in string_refs(block.target_query):
                if not _blank(ref.value):
                    found.append((EntryLocation(LeakKind.QUERY_STRING, index,
                                                ("query", *ref.path)),
                                  ref.value))
        if isinstance(block.text_arg, str) and not _blank(block.text_arg):
            # author-typed text can leak just like a query string
            found.append((EntryLocation(LeakKind.QUERY_STRING, index,
                                        ("text_arg",)), block.text_arg))
        if block.snapshot is not None:
            for el in block.snapshot.root.walk():
                if isinstance(el.text, str) and not _blank(el.text):
                    found.append((EntryLocation(LeakKind.SNAPSHOT_TEXT, index,
                                                (el.element_id, "text")),
                                  el.text))
                if isinstance(el.content_description, str) \
                        and not _blank(el.content_description):
                    found.append((EntryLocation(
                        LeakKind.SNAPSHOT_TEXT, index,
                        (el.element_id, "content_description")),
                        el.content_description))
    for param in script.parameters:
        for vi, value in enumerate(param.possible_values):
            if isinstance(value, str) and not _blank(value):
                found.append((EntryLocation(LeakKind.PARAMETER_VALUE,
                                            param.bound_op, (param.name, vi)),
                              value))
    return found


def scan(script: Script) -> list[EntryLocation]:
    """All string slots that could carry personal information, in
    document order: queries and typed text, snapshot texts, condition
    literals, parameter values."""
    return [loc for loc, _ in _scan_with_content(script)]


def _context_before(script: Script, index: int) -> AppContext | None:
    """Context of the nearest operation with a snapshot before this block."""
    best = None
    for i, block in walk_blocks(script.blocks):
        if i >= index:
            break
        if isinstance(block, Operation) and block.snapshot is not None:
            best = block.snapshot.context
    return best


def _location_context(script: Script, loc: EntryLocation) -> AppContext | None:
    block = None
    for i, b in walk_blocks(script.blocks):
        if i == loc.block_index:
            block = b
            break
    if block is None:
        raise DocumentError(f"location points at missing block {loc.block_index}")
    if loc.kind is LeakKind.CONDITION_LITERAL:
        return _context_before(script, loc.block_index)
    if isinstance(block, Operation) and block.snapshot is not None:
        return block.snapshot.context
    return None


def classify(script: Script, client: AggregationClient) -> ObfuscationReport:
    """Deduplicate scanned slots into (context, content) entries and fetch
    verdicts in one batched server call.

    Every slot must resolve to a screen context: without one the entry could
    be neither classified nor hashed, so sharing is refused outright.
    """
    slots = _scan_with_content(script)
    keyed: dict[tuple[AppContext, str], list[EntryLocation]] = {}
    order: list[tuple[AppContext, str]] = []
    for loc, content in slots:
        ctx = _location_context(script, loc)
        if ctx is None:
            raise DocumentError(
                f"cannot resolve a screen context for {loc.kind.value} at "
                f"block {loc.block_index}; sharing refused")
        key = (ctx, content)
        if key not in keyed:
            keyed[key] = []
            order.append(key)
        keyed[key].append(loc)

    verdicts = client.uniqueness_pairs(order)
    entries = tuple(
        ClassifiedEntry(entry_id=i, context=ctx, content=content,
                        locations=tuple(keyed[(ctx, content)]),
                        f=v.f, g=v.g, p_value=v.p_value,
                        verdict_public=v.public,
                        salted_hash=v.salted_pair_hash)
        for i, ((ctx, content), v) in enumerate(zip(order, verdicts)))
    return ObfuscationReport(script_name=script.name, entries=entries)


def apply_override(report: ObfuscationReport, entry_id: int,
                   public: bool) -> ObfuscationReport:
    """Record the author's label. Setting the label back to the server's
    verdict clears the override, so toggling twice is a no-op."""
    target = report.entry(entry_id)
    override = None if public == target.verdict_public else public
    entries = tuple(dataclasses.replace(e, override=override)
                    if e.entry_id == entry_id else e
                    for e in report.entries)
    return ObfuscationReport(report.script_name, entries)


def report_document(report: ObfuscationReport) -> dict:
    return {
        "script": report.script_name,
        "entries": [
            {"entry_id": e.entry_id, "content": e.content,
             "locations": [loc.document() for loc in e.locations],
             "f": e.f, "g": e.g, "p_value": e.p_value,
             "public": e.verdict_public, "override": e.override,
             "final_public": e.final_public}
            for e in report.entries],
        "counts": report.counts,
    }


def parse_overrides(raw: dict | str) -> dict[int, bool]:
    if isinstance(raw, str):
        raw = json.loads(raw)
    if not isinstance(raw, dict):
        raise DocumentError("overrides must be a JSON object of entry_id: bool")
    out = {}
    for key, value in raw.items():
        if not isinstance(value, bool):
            raise DocumentError(f"override for {key!r} must be true or false")
        try:
            out[int(key)] = value
        except ValueError:
            raise DocumentError(f"override key {key!r} is not an entry id") \
                from None
    return out


@dataclass(frozen=True)
class ObfuscationResult:
    shared: Script
    document: dict
    text: str
    warnings: tuple[str, ...]


def _hide_element(el: UiElement, hide: dict[str, str]) -> UiElement:
    text = el.text
    if isinstance(text, str) and text in hide:
        text = HiddenValue(hide[text])
    desc = el.content_description
    if isinstance(desc, str) and desc in hide:
        desc = HiddenValue(hide[desc])
    children = tuple(_hide_element(c, hide) for c in el.children)
    if text is el.text and desc is el.content_description \
            and children == el.children:
        return el
    return dataclasses.replace(el, text=text, content_description=desc,
                               children=children)


def obfuscate(script: Script, report: ObfuscationReport) -> ObfuscationResult:
    """Produce the shareable form of the script.

    A slot is hidden when its content is personal under any context in the
    report: a per-context split would leave the same bytes visible elsewhere
    in the file and fail the sweep anyway. The hash written at a slot is
    always the salted hash for that slot's own (context, content) pair.
    """
    covered = {loc for e in report.entries for loc in e.locations}
    for loc in scan(script):
        if loc not in covered:
            raise DocumentError(
                f"report does not cover {loc.kind.value} at block "
                f"{loc.block_index}; re-run classification")

    personal_contents = {e.content for e in report.entries
                         if not e.final_public}
    by_key = {(e.context, e.content): e for e in report.entries}

    def hash_for(ctx: AppContext, content: str) -> str:
        return by_key[(ctx, content)].salted_hash

    warnings: list[str] = []

    def rewrite_blocks(blocks: tuple, base: list[int]) -> tuple:
        out = []
        for block in blocks:
            index = base[0]
            base[0] += 1
            if isinstance(block, Conditional):
                ctx = _context_before(script, index)
                cond = block.condition
                for path, lit in condition_literals(cond):
                    if lit.value in personal_contents:
                        cond = replace_condition_operand(
                            cond, path, HiddenLiteral(hash_for(ctx, lit.value)))
                then = rewrite_blocks(block.then_block, base)
                orelse = rewrite_blocks(block.else_block, base) \
                    if block.else_block else None
                out.append(Conditional(cond, then, orelse))
                continue
            out.append(_rewrite_operation(block, index))
        return tuple(out)

    def _rewrite_operation(op: Operation, index: int) -> Operation:
        changes: dict = {}
        ctx = op.snapshot.context if op.snapshot else None
        q = op.target_query
        if q is not None:
            for ref in string_refs(q):
                if ref.value in personal_contents:
                    q = replace_at(q, ref.path, HiddenPropertyEq(
                        ref.predicate, hash_for(ctx, ref.value)))
            if q is not op.target_query:
                changes["target_query"] = q
        if isinstance(op.text_arg, str) and op.text_arg in personal_contents:
            changes["text_arg"] = HiddenValue(hash_for(ctx, op.text_arg))
        if op.kind in ELEMENT_KINDS and op.snapshot is not None:
            graph = op.snapshot.graph
            hide = {e.content: e.salted_hash for e in report.entries
                    if e.context == op.snapshot.context
                    and e.content in personal_contents}
            alt = None
            matches = evaluate(op.target_query, graph)
            if len(matches) != 1:
                warnings.append(
                    f"block {index}: target query matches {len(matches)} "
                    f"elements on its own snapshot; no alternative query")
            else:
                try:
                    alt = synthesize_alternative(graph, matches[0],
                                                 personal_contents)
                except SynthesisError as exc:
                    warnings.append(f"block {index}: {exc}")
            changes["alt_query"] = alt
            root = _hide_element(op.snapshot.root, hide)
            if root is not op.snapshot.root:
                changes["snapshot"] = ScreenSnapshot(op.snapshot.context, root)
        if not changes:
            return op
        return dataclasses.replace(op, **changes)

    new_blocks = rewrite_blocks(script.blocks, [0])

    new_params = []
    for param in script.parameters:
        ctx = _location_context(
            script, EntryLocation(LeakKind.PARAMETER_VALUE, param.bound_op,
                                  (param.name, 0)))
        values = tuple(
            HiddenValue(hash_for(ctx, v))
            if isinstance(v, str) and v in personal_contents else v
            for v in param.possible_values)
        new_params.append(Parameter(param.name, param.bound_op, values))

    shared = Script(script.name, new_blocks, tuple(new_params))
    document = serialize_script(shared, shared=True)
    text = script_to_json(shared, shared=True)
    sweep_output(text, personal_contents)
    return ObfuscationResult(shared=shared, document=document, text=text,
                             warnings=tuple(warnings))


def sweep_output(text: str, personal_contents: set[str]) -> None:
    """Exact substring scan over the serialized output, in both raw and
    JSON-escaped spellings. Any hit means the pipeline failed: hard stop."""
    for content in personal_contents:
        spellings = {content,
                     json.dumps(content, ensure_ascii=False)[1:-1],
                     json.dumps(content)[1:-1]}
        for form in spellings:
            if form and form in text:
                raise LeakDetected(
                    f"personal content would appear in the shared output "
                    f"({len(form)} bytes); refusing to share")


def share(script: Script, client: AggregationClient,
          overrides: dict[int, bool] | None = None
          ) -> tuple[ObfuscationResult, ObfuscationReport]:
    """classify + override + obfuscate in one step."""
    report = classify(script, client)
    for entry_id, public in sorted((overrides or {}).items()):
        report = apply_override(report, entry_id, public)
    return obfuscate(script, report), report
