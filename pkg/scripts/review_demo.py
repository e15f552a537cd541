"""Open the interactive review page for a freshly recorded script.

Builds a small population, records the bundled demo, classifies it, and
serves the review endpoint until the share is confirmed in the browser
(or the process is interrupted).
"""

import argparse
import tempfile
from pathlib import Path

from pinalite.apps import BLUEPRINTS
from pinalite.harness import gen_population, local_backend, upload_members
from pinalite.review import LOOPBACK, ReviewSession, serve_review
from pinalite.scripting import record_from_trace

DEFAULT_UI = Path(__file__).resolve().parent.parent / "frontend" / "dist"


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--app", choices=sorted(BLUEPRINTS),
                        default="banking")
    parser.add_argument("--users", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--out", type=Path,
                        help="shared script destination "
                             "(default: a temp file)")
    parser.add_argument("--ui-dir", type=Path,
                        default=DEFAULT_UI if DEFAULT_UI.is_dir() else None,
                        help="built review page to serve at /")
    args = parser.parse_args()

    bp = BLUEPRINTS[args.app]
    population = gen_population(bp, args.users, seed=args.seed)
    _, http = local_backend(seed=args.seed)
    clients = upload_members(population.members, http)
    script = record_from_trace(bp.demo(population.author.app), bp.task)

    out = args.out or Path(tempfile.mkdtemp()) / f"{args.app}-shared.json"
    session = ReviewSession(script, clients[0], out_path=out)
    counts = session.report.counts
    print(f"recorded {script.name!r}: {counts['public']} public entries, "
          f"{counts['personal']} flagged personal")
    if args.ui_dir:
        print(f"serving review page from {args.ui_dir}")
    print(f"review at http://{LOOPBACK}:{args.port}/ "
          f"(confirm there to write the shared script)")
    try:
        shared = serve_review(session, port=args.port, ui_dir=args.ui_dir)
    except KeyboardInterrupt:
        print("\ninterrupted; nothing shared")
        return 1
    if shared is None:
        print("review ended without confirmation; nothing shared")
        return 1
    print(f"confirmed; wrote {shared}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
