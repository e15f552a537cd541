"""Population generation, accuracy grading, leak scans, attack simulation."""

import random

import pytest

from pinalite.apps import BLUEPRINTS
from pinalite.harness import (
    app_contents,
    dictionary_attack_sim,
    e2e_scenario,
    find_leaks,
    gen_population,
    local_backend,
    run_eval,
    scenario_leaks,
    upload_members,
)
from pinalite.queries import serialize_query
from pinalite.scripting import operations


# --- populations ---

def test_population_is_deterministic_under_its_seed():
    a = gen_population("banking", 5, seed=3)
    b = gen_population("banking", 5, seed=3)
    assert a == b
    c = gen_population("banking", 5, seed=4)
    assert c != a


def test_personal_strings_never_collide_across_members():
    for name in BLUEPRINTS:
        population = gen_population(name, 6, seed=1)
        for i, member in enumerate(population.members):
            bp = population.blueprint
            personal = {member.profile[f] for f in bp.personal_fields
                        if member.profile[f].strip()}
            for j, other in enumerate(population.members):
                if i != j:
                    assert personal.isdisjoint(app_contents(other.app))


def test_one_member_loses_each_dynamic_field():
    population = gen_population("coffee", 5, seed=0)
    blank = [m for m in population.members if m.profile["promo"] == ""]
    assert len(blank) == 1
    assert blank[0] is not population.author
    promo = population.author.profile["promo"]
    assert promo in app_contents(population.author.app)
    assert promo not in app_contents(blank[0].app)


def test_population_rejects_zero_members():
    with pytest.raises(ValueError):
        gen_population("banking", 0, seed=0)


def test_upload_reaches_the_server():
    population = gen_population("banking", 3, seed=5)
    server, http = local_backend(seed=5)
    clients = upload_members(population.members, http)
    assert len(clients) == 3
    assert server.health()["entries"] > 0
    assert server.health()["contexts"] == len(population.author.app.screens)


# --- accuracy ---

def test_eval_recall_is_total_on_every_bundled_app():
    for name in BLUEPRINTS:
        result = run_eval(name, n_users=5, seed=0)
        assert result.recall == 1.0, name
        assert result.fn == 0, name
        assert len(result.rows) >= 40, (name, len(result.rows))


def test_static_apps_grade_with_perfect_precision():
    for name in ("banking", "ride"):
        result = run_eval(name, n_users=5, seed=0)
        assert result.precision == 1.0, name
        assert result.fp == 0


def test_dynamic_public_fields_cost_precision():
    result = run_eval("coffee", n_users=5, seed=0)
    assert result.precision < 1.0
    assert result.fp >= 1
    false_positives = [r for r in result.rows
                       if r.predicted_personal and not r.truth_personal]
    assert any("Pumpkin" in r.content for r in false_positives)
    dynamic_row = false_positives[0]
    assert dynamic_row.f == 4 and dynamic_row.g == 5


def test_eval_counts_line_up():
    result = run_eval("banking", n_users=5, seed=2)
    assert result.tp + result.fp + result.tn + result.fn == len(result.rows)
    assert result.accuracy == (result.tp + result.tn) / len(result.rows)
    assert all(r.g == 5 for r in result.rows)


def test_eval_is_reproducible():
    assert run_eval("ride", n_users=5, seed=7) == run_eval("ride", n_users=5,
                                                           seed=7)


def test_eval_document_is_json_shaped():
    doc = run_eval("coffee", n_users=5, seed=0).document()
    assert doc["app"] == "coffee"
    assert doc["n"] == len(doc["rows"])
    assert doc["n_personal"] == sum(1 for r in doc["rows"]
                                    if r["truth"] == "personal")
    assert {"context", "content", "f", "g", "p_value", "predicted",
            "truth"} <= doc["rows"][0].keys()


# --- end to end ---

@pytest.mark.parametrize("name", sorted(BLUEPRINTS))
def test_shared_scripts_execute_for_a_stranger(name):
    scenario = e2e_scenario(name, n_users=5, seed=0)
    assert scenario.trace.ok
    assert scenario.retrace.ok
    assert scenario.result.warnings == ()


@pytest.mark.parametrize("name", sorted(BLUEPRINTS))
def test_no_surface_leaks_any_personal_string(name):
    scenario = e2e_scenario(name, n_users=5, seed=0)
    leaks = scenario_leaks(scenario)
    assert leaks == {"shared": (), "wire": (), "state": ()}


def test_alternative_queries_are_unique_and_personal_free():
    from pinalite.queries import evaluate

    for name in sorted(BLUEPRINTS):
        scenario = e2e_scenario(name, n_users=5, seed=0)
        secrets = scenario.population.personal_contents()
        alternatives = [(op.alt_query, op.snapshot)
                        for _, op in operations(scenario.result.shared)
                        if op.alt_query is not None]
        assert alternatives, name
        for alt, snapshot in alternatives:
            assert find_leaks(serialize_query(alt), secrets) == ()
            assert len(evaluate(alt, snapshot.graph)) == 1


def test_rebuilt_script_wears_the_consumers_values():
    scenario = e2e_scenario("banking", n_users=5, seed=0)
    consumer_checking = scenario.consumer.profile["checking"]
    rebuilt_click = operations(scenario.rebuilt)[2][1]
    assert consumer_checking in serialize_query(rebuilt_click.target_query)
    assert rebuilt_click.alt_query is None
    assert consumer_checking in scenario.rebuilt.parameters[0].possible_values


# --- leak scanning ---

def test_find_leaks_sees_raw_and_escaped_forms():
    assert find_leaks('the "Maple Diner #221" charge', ["Maple Diner #221"]) \
        == ("Maple Diner #221",)
    escaped_only = "prefix Home \\u00b7 9 Elm Street suffix"
    assert find_leaks(escaped_only, ["Home · 9 Elm Street"]) \
        == ("Home · 9 Elm Street",)
    assert find_leaks("nothing here", ["Maple Diner #221"]) == ()


# --- dictionary attack ---

def test_dictionary_attack_finds_nothing():
    scenario = e2e_scenario("banking", n_users=5, seed=0)
    attack = dictionary_attack_sim(scenario, pool_size=10_000)
    assert attack.pool_size == 10_000
    assert attack.hidden_hashes > 0
    assert attack.truth_in_pool
    assert attack.matches == ()
