import json

import pytest

from pinalite.errors import DocumentError, ExecutionError, QuerySyntaxError, RecordingError
from pinalite.queries import Conj, Flag, Nth, PropertyEq, evaluate, parse_query
from pinalite.screens import AppContext, HiddenValue, Predicate, UiElement
from pinalite.scripting import (
    BoolOp,
    Comparison,
    Conditional,
    DemoEvent,
    HiddenLiteral,
    Literal,
    OpKind,
    Operation,
    Parameter,
    ScreenSnapshot,
    Script,
    VarRef,
    condition_literals,
    describe_element,
    deserialize_script,
    eval_condition,
    operations,
    parse_condition,
    record_from_trace,
    replace_condition_operand,
    script_to_json,
    serialize_condition,
    serialize_script,
    validate,
    walk_blocks,
)

CTX = AppContext("com.coffee", "Order")


def leaf(eid, cls="android.widget.TextView", **kw):
    return UiElement(element_id=eid, class_name=cls, **kw)


def snap(*children, cls="android.widget.LinearLayout"):
    return ScreenSnapshot(CTX, UiElement(element_id="root", class_name=cls,
                                         bounds=(0, 0, 400, 600),
                                         children=children))


# --- conditions ---

def test_condition_round_trip():
    text = '(and (> $balance "100") (= $status "active"))'
    cond = parse_condition(text)
    assert cond == BoolOp("and", (
        Comparison(">", VarRef("balance"), Literal("100")),
        Comparison("=", VarRef("status"), Literal("active"))))
    assert serialize_condition(cond) == text


def test_condition_numeric_vs_string_typing():
    gt = parse_condition('(> $x "90")')
    assert eval_condition(gt, {"x": "100"})        # 100 > 90 numerically
    assert not eval_condition(gt, {"x": "9"})
    assert eval_condition(gt, {"x": "ZZ"})         # falls back to string order
    le = parse_condition('(<= $x "2024-03-01")')
    assert eval_condition(le, {"x": "2024-02-28"})


def test_condition_boolean_operators():
    cond = parse_condition('(or (= $a "1") (and (= $b "2") (= $c "3")))')
    assert eval_condition(cond, {"a": "0", "b": "2", "c": "3"})
    assert eval_condition(cond, {"a": "1", "b": "9", "c": "9"})
    assert not eval_condition(cond, {"a": "0", "b": "2", "c": "9"})


def test_condition_unknown_variable_is_an_error():
    with pytest.raises(ExecutionError):
        eval_condition(parse_condition('(= $ghost "1")'), {})


def test_condition_hidden_literal_cannot_evaluate():
    cond = parse_condition('(= $x (hidden "ab12"))')
    assert cond == Comparison("=", VarRef("x"), HiddenLiteral("ab12"))
    with pytest.raises(ExecutionError):
        eval_condition(cond, {"x": "1"})


def test_condition_literal_paths_and_replacement():
    cond = parse_condition('(and (> $balance "100") (= "flag" $mode))')
    found = condition_literals(cond)
    assert [(p, lit.value) for p, lit in found] == [((0, 1), "100"), ((1, 0), "flag")]
    hidden = replace_condition_operand(cond, (0, 1), HiddenLiteral("cd" * 64))
    assert serialize_condition(hidden) == (
        f'(and (> $balance (hidden "{"cd" * 64}")) (= "flag" $mode))')
    assert parse_condition(serialize_condition(hidden)) == hidden


@pytest.mark.parametrize("bad", [
    '(>= $x)', '(= "a" "b" "c")', '(nor (= $a "1") (= $b "2"))',
    '(and (= $a "1"))', '($x)', '(= x "1")', '',
])
def test_condition_parse_errors(bad):
    with pytest.raises(QuerySyntaxError):
        parse_condition(bad)


# --- operation invariants ---

def test_operation_invariants():
    with pytest.raises(DocumentError):
        Operation(kind=OpKind.CLICK)  # no target query
    with pytest.raises(DocumentError):
        Operation(kind=OpKind.SET_TEXT,
                  target_query=Flag(Predicate.IS_FOCUSED))  # no text
    with pytest.raises(DocumentError):
        Operation(kind=OpKind.PAUSE, duration_s=0)
    with pytest.raises(DocumentError):
        Operation(kind=OpKind.LAUNCH)
    assert Operation(kind=OpKind.PAUSE, wait_for_user=True).duration_s is None
    assert Operation(kind=OpKind.LAUNCH, app=CTX).app == CTX


# --- recording ---

def test_record_single_click_on_labeled_button():
    screen = snap(leaf("b", cls="android.widget.Button", text="next",
                       clickable=True))
    script = record_from_trace(
        [DemoEvent(kind=OpKind.CLICK, screen=screen, target_id="b")], "tap next")
    [op] = [b for _, b in walk_blocks(script.blocks)]
    assert op.kind is OpKind.CLICK
    assert op.target_query == Conj((
        PropertyEq(Predicate.HAS_CLASS_NAME, "android.widget.Button"),
        PropertyEq(Predicate.HAS_TEXT, "next")))
    assert op.snapshot == screen
    assert op.alt_query is None
    assert script.parameters == ()


def test_record_menu_choice_creates_parameter_in_menu_order():
    menu = snap(
        UiElement(element_id="list", class_name="android.widget.ListView",
                  bounds=(0, 0, 400, 300),
                  children=(
                      leaf("m1", text="tall", bounds=(0, 0, 400, 100)),
                      leaf("m2", text="grande", bounds=(0, 100, 400, 200)),
                      leaf("m3", text="venti", bounds=(0, 200, 400, 300)),
                  )))
    script = record_from_trace(
        [DemoEvent(kind=OpKind.CLICK, screen=menu, target_id="m3",
                   menu_choice=True, parameter_name="size")], "pick size")
    [param] = script.parameters
    assert param == Parameter(name="size", bound_op=0,
                              possible_values=("tall", "grande", "venti"))
    assert validate(script) == []


def test_record_set_text_into_focused_field():
    screen = snap(
        UiElement(element_id="field", class_name="android.widget.EditText",
                  focused=True, bounds=(0, 0, 400, 80)),
        leaf("send", cls="android.widget.Button", text="Send", clickable=True))
    script = record_from_trace(
        [DemoEvent(kind=OpKind.SET_TEXT, screen=screen, target_id="field",
                   typed_text="hello")], "type message")
    [(_, op)] = operations(script)
    assert op.text_arg == "hello"
    assert op.target_query == Conj((
        PropertyEq(Predicate.HAS_CLASS_NAME, "android.widget.EditText"),
        Flag(Predicate.IS_FOCUSED)))


def test_describe_falls_back_to_ordinal():
    screen = snap(
        leaf("a", cls="B", text="Go", clickable=True, bounds=(0, 0, 10, 10)),
        leaf("b", cls="B", text="Go", clickable=True, bounds=(0, 20, 10, 30)))
    q = describe_element(screen.graph, "b")
    assert q == Nth(2, Conj((PropertyEq(Predicate.HAS_CLASS_NAME, "B"),
                             Flag(Predicate.IS_CLICKABLE))))


def test_describe_prefers_unique_view_id_over_flags():
    screen = snap(
        leaf("a", cls="B", clickable=True, view_id="id/ok"),
        leaf("b", cls="B", clickable=True))
    assert describe_element(screen.graph, "a") == PropertyEq(
        Predicate.HAS_VIEW_ID, "id/ok")


def test_recording_error_on_indistinguishable_element():
    screen = snap(leaf("a", enabled=False), leaf("b", enabled=False))
    with pytest.raises(RecordingError):
        record_from_trace(
            [DemoEvent(kind=OpKind.CLICK, screen=screen, target_id="b")], "x")


def test_recording_error_when_menu_item_has_no_text_description():
    # Two menu rows with the same label: text cannot describe the choice.
    menu = snap(
        UiElement(element_id="list", class_name="L", bounds=(0, 0, 400, 200),
                  children=(leaf("m1", text="same", clickable=True,
                                 bounds=(0, 0, 400, 100)),
                            leaf("m2", text="same", clickable=True,
                                 bounds=(0, 100, 400, 200)))))
    with pytest.raises(RecordingError):
        record_from_trace([DemoEvent(kind=OpKind.CLICK, screen=menu,
                                     target_id="m2", menu_choice=True)], "x")


# --- serialization ---

def sample_script() -> Script:
    menu = snap(
        UiElement(element_id="list", class_name="android.widget.ListView",
                  bounds=(0, 0, 400, 300),
                  children=(
                      leaf("m1", text="tall", bounds=(0, 0, 400, 100)),
                      leaf("m2", text="grande", bounds=(0, 100, 400, 200)),
                      leaf("m3", text="venti", bounds=(0, 200, 400, 300)),
                  )))
    base = record_from_trace([
        DemoEvent(kind=OpKind.LAUNCH, app=CTX),
        DemoEvent(kind=OpKind.CLICK, screen=menu, target_id="m2",
                  menu_choice=True, parameter_name="size"),
        DemoEvent(kind=OpKind.EXTRACT_VALUE, screen=menu, target_id="m1",
                  variable_name="first_size"),
        DemoEvent(kind=OpKind.PAUSE, duration_s=1.5),
    ], "order coffee")
    conditional = Conditional(
        condition=parse_condition('(= $first_size "tall")'),
        then_block=(Operation(kind=OpKind.PAUSE, wait_for_user=True),),
        else_block=(Operation(kind=OpKind.PAUSE, duration_s=0.5),))
    return Script(name=base.name, blocks=base.blocks + (conditional,),
                  parameters=base.parameters)


def test_script_document_round_trip():
    script = sample_script()
    doc = serialize_script(script)
    assert doc["version"] == "pinalite-script/1"
    assert deserialize_script(doc) == script


def test_script_json_is_canonical():
    script = sample_script()
    first = script_to_json(script)
    reloaded = deserialize_script(json.loads(first))
    assert script_to_json(reloaded) == first
    assert first.endswith("\n")


def test_snapshot_graphs_rebuilt_on_load():
    script = deserialize_script(serialize_script(sample_script()))
    op = next(op for _, op in operations(script) if op.kind is OpKind.CLICK)
    assert op.snapshot is not None
    assert evaluate(parse_query('(text "grande")'), op.snapshot.graph) == ["m2"]


def test_shared_serialization_marks_missing_alt_queries():
    script = sample_script()
    doc = serialize_script(script, shared=True)
    assert doc["version"] == "pinalite-shared/1"
    click = doc["blocks"][1]
    assert click["kind"] == "CLICK"
    assert click["alt_query"] is None
    assert deserialize_script(doc) == script


def test_hidden_text_arg_and_parameter_values_round_trip():
    field = snap(UiElement(element_id="f", class_name="E", focused=True))
    script = Script(name="s", blocks=(
        Operation(kind=OpKind.SET_TEXT,
                  target_query=Flag(Predicate.IS_FOCUSED),
                  text_arg=HiddenValue("ab" * 64), snapshot=field),),
        parameters=(Parameter("p", 0, ("x", HiddenValue("cd" * 64))),))
    doc = serialize_script(script, shared=True)
    assert doc["blocks"][0]["text_arg"] == {"hidden": True, "hash": "ab" * 64}
    assert doc["parameters"][0]["possible_values"][1] == {
        "hidden": True, "hash": "cd" * 64}
    assert deserialize_script(doc) == script


@pytest.mark.parametrize("mutate, path_fragment", [
    (lambda d: d.update(version="pinalite-script/2"), "version"),
    (lambda d: d["blocks"][1].update(kind="SWIPE"), "blocks[1].kind"),
    (lambda d: d["blocks"][1].update(target_query="(text"), "blocks[1].target_query"),
    (lambda d: d["blocks"][4]["then"].clear(), "blocks[4].then"),
    (lambda d: d.update(blocks=[]), "blocks"),
    (lambda d: d["parameters"][0].pop("bound_op"), "parameters[0]"),
])
def test_schema_violations_name_their_path(mutate, path_fragment):
    doc = serialize_script(sample_script())
    mutate(doc)
    with pytest.raises(DocumentError) as err:
        deserialize_script(doc)
    assert err.value.path == path_fragment or path_fragment in str(err.value)


# --- block indexing and validation ---

def test_walk_blocks_flat_preorder_indexing():
    script = sample_script()
    kinds = [(i, type(b).__name__ if isinstance(b, Conditional)
              else b.kind.value) for i, b in walk_blocks(script.blocks)]
    assert kinds == [
        (0, "LAUNCH"), (1, "CLICK"), (2, "EXTRACT_VALUE"), (3, "PAUSE"),
        (4, "Conditional"), (5, "PAUSE"), (6, "PAUSE")]


def test_validate_clean_script():
    assert validate(sample_script()) == []


def test_validate_missing_snapshot_finding():
    script = Script(name="s", blocks=(
        Operation(kind=OpKind.CLICK, target_query=Flag(Predicate.IS_CLICKABLE)),))
    [finding] = validate(script)
    assert "no snapshot" in finding


def test_validate_parameter_bound_to_pause():
    script = Script(name="s", blocks=(
        Operation(kind=OpKind.PAUSE, duration_s=1.0),),
        parameters=(Parameter("p", 0, ("a",)),))
    [finding] = validate(script)
    assert "does not target an element" in finding


def test_validate_parameter_value_not_in_query():
    screen = snap(leaf("a", text="tall", clickable=True))
    script = Script(name="s", blocks=(
        Operation(kind=OpKind.CLICK,
                  target_query=describe_element(screen.graph, "a"),
                  snapshot=screen),),
        parameters=(Parameter("p", 0, ("grande",)),))
    [finding] = validate(script)
    assert "none of its possible values" in finding


def test_validate_undeclared_condition_variable():
    script = Script(name="s", blocks=(
        Operation(kind=OpKind.PAUSE, duration_s=1.0),
        Conditional(condition=parse_condition('(= $ghost "1")'),
                    then_block=(Operation(kind=OpKind.PAUSE, duration_s=1.0),))))
    [finding] = validate(script)
    assert "$ghost" in finding
