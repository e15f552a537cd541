"""Walk one script through the full pipeline and narrate each stage.

An author records a banking payment, the classifier flags their account
rows, sharing swaps those strings for salted hashes, and a consumer who
never uploaded anything replays the script against their own screens.
"""

import argparse
import json

from pinalite.apps import BLUEPRINTS
from pinalite.harness import (
    dictionary_attack_sim,
    e2e_scenario,
    scenario_leaks,
)
from pinalite.queries import serialize_query
from pinalite.scripting import Conditional, deserialize_script

RULE = "-" * 72


def show_queries(label, script):
    print(f"\n{label}")
    for i, block in enumerate(script.blocks):
        if isinstance(block, Conditional) or block.target_query is None:
            continue
        print(f"  op {i} ({block.kind.value}): "
              f"{serialize_query(block.target_query)}")
    for param in script.parameters:
        print(f"  parameter {param.name!r} on op {param.bound_op}: "
              f"{list(param.possible_values)}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--app", choices=sorted(BLUEPRINTS),
                        default="banking")
    parser.add_argument("--users", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    print(f"building a {args.app} population: {args.users} uploading users "
          f"plus one consumer who never uploads")
    sc = e2e_scenario(args.app, n_users=args.users, seed=args.seed)
    author = sc.population.author

    print(RULE)
    print(f"author demonstrates: {sc.population.blueprint.task}")
    show_queries("recorded script (author plaintext):", sc.script)

    print(RULE)
    print("classification against the aggregation server:")
    for entry in sc.report.entries:
        verdict = "public  " if entry.verdict_public else "PERSONAL"
        print(f"  {verdict} f={entry.f} g={entry.g} p={entry.p_value:.4f}  "
              f"{entry.content!r}")
    counts = sc.report.counts
    print(f"  -> {counts['public']} public, {counts['personal']} personal")

    print(RULE)
    shared = deserialize_script(json.loads(sc.result.text))
    show_queries("shared script (personal strings now salted hashes):",
                 shared)
    leaks = scenario_leaks(sc)
    print(f"\nleak scan over shared file / wire / server state: "
          f"{sum(len(v) for v in leaks.values())} hits")
    attack = dictionary_attack_sim(sc)
    print(f"dictionary attack with {attack.pool_size} guesses "
          f"(true values included: {attack.truth_in_pool}): "
          f"{len(attack.matches)} matches")

    print(RULE)
    print("consumer replays the shared script on their own device:")
    for event in sc.trace.events:
        line = f"  op {event.op_index}: {event.kind.value}"
        if event.element_id:
            line += f" -> {event.element_id}"
        if event.rebuilt:
            line += f"  (rebuilt {len(event.rebuilt)} hidden slots)"
        print(line)
    print(f"  finished on {sc.trace.final_screen!r}, ok={sc.trace.ok}")

    show_queries("script rebuilt with the consumer's own strings:",
                 sc.rebuilt)
    rebuilt_queries = " ".join(
        serialize_query(b.target_query) for b in sc.rebuilt.blocks
        if not isinstance(b, Conditional) and b.target_query is not None)
    consumer_used = sorted(v for v in set(sc.consumer.profile.values())
                           if v and v in rebuilt_queries)
    author_left = sorted(v for v in set(author.profile.values())
                         if v and v in rebuilt_queries)
    print(f"\nconsumer strings embedded in the rebuilt queries: "
          f"{consumer_used}")
    print(f"author strings still present: {author_left or 'none'}")

    print(RULE)
    print("replaying the rebuilt script (no fallback queries needed):")
    print(f"  ok={sc.retrace.ok}, "
          f"rebuild events: "
          f"{sum(1 for e in sc.retrace.events if e.rebuilt)}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
