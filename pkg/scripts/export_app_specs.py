"""Write app fixtures, demo traces, and eval specs for driving the CLI.

For each bundled app this produces, under the output directory:
  <app>.app.json    one sampled app instance (for `pinalite run --app`)
  <app>.trace.json  the bundled demonstration (for `pinalite record`)
  <app>.screens/    that instance's screens (for `pinalite ingest`)
  <app>.eval.json   an eval parameter file (for `pinalite eval --spec`)
"""

import argparse
import json
import random
from pathlib import Path

from pinalite.apps import BLUEPRINTS, app_document
from pinalite.screens import screen_document
from pinalite.scripting import demo_trace_document


def dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n",
                    encoding="utf-8")
    print(f"  {path}")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("exports"))
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    args.out.mkdir(parents=True, exist_ok=True)
    for name in sorted(BLUEPRINTS):
        bp = BLUEPRINTS[name]
        app = bp.build(bp.sample(random.Random((name, args.seed).__repr__())))
        print(f"{name}:")
        dump(args.out / f"{name}.app.json", app_document(app))
        dump(args.out / f"{name}.trace.json",
             demo_trace_document(bp.demo(app)))
        screens = args.out / f"{name}.screens"
        screens.mkdir(exist_ok=True)
        for screen_name, snap in app.screens.items():
            dump(screens / f"{screen_name}.json",
                 screen_document(snap.root, snap.context))
        dump(args.out / f"{name}.eval.json",
             {"app": name, "users": 5, "t": 0.5, "seed": args.seed})
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
