"""Grade the classifier on the bundled apps, one table row per app.

Positives are entries classified personal; ground truth comes from each
simulated user's sampled profile.
"""

import argparse
import json
from pathlib import Path

from pinalite.apps import BLUEPRINTS
from pinalite.harness import run_eval


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--app", choices=sorted(BLUEPRINTS), action="append",
                        help="restrict to one app (repeatable; default: all)")
    parser.add_argument("--users", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--t", type=float, default=0.5)
    parser.add_argument("--json", type=Path,
                        help="also dump every row to this file")
    args = parser.parse_args()

    apps = args.app or sorted(BLUEPRINTS)
    print(f"{'app':<10} {'n':>4} {'personal':>8} {'tp':>4} {'fp':>4} "
          f"{'recall':>7} {'precision':>9} {'accuracy':>8}")
    documents = []
    for app in apps:
        result = run_eval(app, n_users=args.users, seed=args.seed, t=args.t)
        print(f"{result.app:<10} {result.n:>4} {result.n_personal:>8} "
              f"{result.tp:>4} {result.fp:>4} {result.recall:>7.3f} "
              f"{result.precision:>9.3f} {result.accuracy:>8.3f}")
        documents.append(result.document())
    if args.json:
        args.json.write_text(json.dumps(documents, indent=2) + "\n",
                             encoding="utf-8")
        print(f"\nwrote {args.json}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
