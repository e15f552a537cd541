"""Simulated user populations and the measurement tooling built on them.

Everything here is deterministic under a seed: profiles, app instances,
user ids, the server salt. That keeps accuracy numbers and leak scans
reproducible from the command line.
"""

import json
import random
import re
import tempfile
import uuid
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .apps import BLUEPRINTS, AppBlueprint, SimulatedApp
from .client import AggregationClient
from .errors import GenerationError
from .executor import ExecutionTrace, execute
from .hashing import Salt, UserId, client_hash_pair
from .obfuscate import ObfuscationReport, ObfuscationResult, classify, share
from .screens import extract_entries
from .scripting import Script, record_from_trace
from .server import AggregationServer, ServerConfig, create_app

_RESAMPLE_LIMIT = 100


@dataclass(frozen=True)
class Member:
    user_id: UserId
    profile: Mapping[str, str]
    app: SimulatedApp


@dataclass(frozen=True)
class Population:
    blueprint: AppBlueprint
    members: tuple[Member, ...]

    @property
    def author(self) -> Member:
        return self.members[0]

    def personal_contents(self) -> frozenset[str]:
        values = {m.profile[f] for m in self.members
                  for f in self.blueprint.personal_fields}
        return frozenset(v for v in values if v.strip())


def app_contents(app: SimulatedApp) -> frozenset[str]:
    return frozenset(e.content for snap in app.screens.values()
                     for e in extract_entries(snap.graph))


def _mint_user(rng: random.Random) -> UserId:
    return UserId(str(uuid.UUID(int=rng.getrandbits(128), version=4)))


def gen_population(blueprint: AppBlueprint | str, n_users: int = 5,
                   seed: int = 0) -> Population:
    """Sample n_users profiles whose personal strings never collide.

    A personal value appearing verbatim on another member's screens would
    not be unique to its owner, so members are resampled until the cross
    checks hold. One non-author member loses each dynamic field, the way a
    rotating banner is simply absent for some users.
    """
    bp = BLUEPRINTS[blueprint] if isinstance(blueprint, str) else blueprint
    if n_users < 1:
        raise ValueError("a population needs at least one member")
    rng = random.Random(seed)
    members: list[Member] = []
    seen_contents: set[str] = set()
    seen_personal: set[str] = set()
    for _ in range(n_users):
        for _attempt in range(_RESAMPLE_LIMIT):
            profile = bp.sample(rng)
            personal = {profile[f] for f in bp.personal_fields}
            app = bp.build(profile)
            contents = app_contents(app)
            if personal.isdisjoint(seen_contents) \
                    and seen_personal.isdisjoint(contents):
                break
        else:
            raise GenerationError(
                f"could not sample {n_users} collision-free profiles for "
                f"{bp.name!r}")
        members.append(Member(_mint_user(rng), profile, app))
        seen_contents |= contents
        seen_personal |= personal
    for field in bp.dynamic_fields:
        if len(members) < 2:
            break
        victim = rng.randrange(1, len(members))
        profile = dict(members[victim].profile)
        profile[field] = ""
        members[victim] = Member(members[victim].user_id, profile,
                                 bp.build(profile))
    return Population(blueprint=bp, members=tuple(members))


def local_backend(seed: int = 0, t: float = 0.5, alpha: float = 0.05):
    """An aggregation server plus an in-process HTTP client for it."""
    # deferred: fastapi.testclient is heavy and chatty, and most callers
    # of this module never touch it
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        from fastapi.testclient import TestClient

    salt = Salt(random.Random(("salt", seed).__repr__()).randbytes(64))
    server = AggregationServer(salt, ServerConfig(t=t, alpha=alpha))
    return server, TestClient(create_app(server),
                              raise_server_exceptions=False)


def upload_members(members: Sequence[Member],
                   http) -> list[AggregationClient]:
    """Each member contributes every screen of their own app instance."""
    clients = []
    for member in members:
        client = AggregationClient(member.user_id, http=http)
        for snap in member.app.screens.values():
            contents = sorted(e.content for e in extract_entries(snap.graph))
            client.ingest(snap.context, contents)
        clients.append(client)
    return clients


# ---------------------------------------------------------------------------
# Classification accuracy
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EvalRow:
    context: str
    content: str
    f: int
    g: int
    p_value: float
    predicted_personal: bool
    truth_personal: bool


@dataclass(frozen=True)
class EvalResult:
    app: str
    n_users: int
    t: float
    alpha: float
    rows: tuple[EvalRow, ...]
    tp: int
    fp: int
    tn: int
    fn: int
    recall: float
    precision: float
    accuracy: float

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def n_personal(self) -> int:
        return self.tp + self.fn

    def document(self) -> dict:
        return {
            "app": self.app, "users": self.n_users, "t": self.t,
            "alpha": self.alpha, "n": self.n, "n_personal": self.n_personal,
            "tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn,
            "recall": self.recall, "precision": self.precision,
            "accuracy": self.accuracy,
            "rows": [{"context": r.context, "content": r.content,
                      "f": r.f, "g": r.g, "p_value": r.p_value,
                      "predicted": "personal" if r.predicted_personal
                      else "public",
                      "truth": "personal" if r.truth_personal else "public"}
                     for r in self.rows],
        }


def run_eval(blueprint: AppBlueprint | str, n_users: int = 5, seed: int = 0,
             t: float = 0.5, alpha: float = 0.05) -> EvalResult:
    """Record the bundled demo for one app and grade every classified entry.

    Personal means the string came from the author's own profile; the
    classifier never sees that ground truth, only aggregate counts.
    """
    bp = BLUEPRINTS[blueprint] if isinstance(blueprint, str) else blueprint
    population = gen_population(bp, n_users, seed)
    _, http = local_backend(seed=seed, t=t, alpha=alpha)
    clients = upload_members(population.members, http)
    script = record_from_trace(bp.demo(population.author.app), bp.task)
    report = classify(script, clients[0])

    truth = {population.author.profile[f] for f in bp.personal_fields}
    rows = tuple(
        EvalRow(context=f"{e.context.package_name}/{e.context.activity_name}",
                content=e.content, f=e.f, g=e.g, p_value=e.p_value,
                predicted_personal=not e.verdict_public,
                truth_personal=e.content in truth)
        for e in report.entries)
    tp = sum(1 for r in rows if r.predicted_personal and r.truth_personal)
    fp = sum(1 for r in rows if r.predicted_personal and not r.truth_personal)
    fn = sum(1 for r in rows if not r.predicted_personal and r.truth_personal)
    tn = len(rows) - tp - fp - fn
    recall = tp / (tp + fn) if tp + fn else 1.0
    precision = tp / (tp + fp) if tp + fp else 1.0
    accuracy = (tp + tn) / len(rows) if rows else 1.0
    return EvalResult(app=bp.name, n_users=n_users, t=t, alpha=alpha,
                      rows=rows, tp=tp, fp=fp, tn=tn, fn=fn, recall=recall,
                      precision=precision, accuracy=accuracy)


# ---------------------------------------------------------------------------
# End-to-end sharing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class E2EScenario:
    population: Population
    consumer: Member
    script: Script
    report: ObfuscationReport
    result: ObfuscationResult
    trace: ExecutionTrace
    rebuilt: Script
    retrace: ExecutionTrace
    server: AggregationServer
    clients: tuple[AggregationClient, ...]


def e2e_scenario(blueprint: AppBlueprint | str, n_users: int = 5,
                 seed: int = 0) -> E2EScenario:
    """Author records and shares; a user who never uploaded anything runs it.

    The consumer's profile is sampled alongside the population so their
    personal strings are known to the leak scans, but their screens are
    never ingested.
    """
    bp = BLUEPRINTS[blueprint] if isinstance(blueprint, str) else blueprint
    population = gen_population(bp, n_users + 1, seed)
    uploaded = population.members[:n_users]
    consumer = population.members[-1]
    server, http = local_backend(seed=seed)
    clients = upload_members(uploaded, http)
    script = record_from_trace(bp.demo(population.author.app), bp.task)
    result, report = share(script, clients[0])
    trace, rebuilt = execute(result.shared, consumer.app)
    retrace, _ = execute(rebuilt, consumer.app)
    return E2EScenario(population=population, consumer=consumer,
                       script=script, report=report, result=result,
                       trace=trace, rebuilt=rebuilt, retrace=retrace,
                       server=server, clients=tuple(clients))


# ---------------------------------------------------------------------------
# Leak scanning
# ---------------------------------------------------------------------------

def find_leaks(text: str, secrets: Iterable[str]) -> tuple[str, ...]:
    """Secrets present in the text, verbatim or JSON-escaped."""
    hits = set()
    for secret in secrets:
        escaped = json.dumps(secret)[1:-1]
        if secret in text or escaped in text:
            hits.add(secret)
    return tuple(sorted(hits))


def scenario_leaks(scenario: E2EScenario) -> dict[str, tuple[str, ...]]:
    """Scan every surface that leaves the author's device.

    The rebuilt script is excluded on purpose: it exists only on the
    consumer's device and rightly contains the consumer's own plaintext.
    """
    secrets = scenario.population.personal_contents()
    shared = find_leaks(scenario.result.text, secrets)
    wire_hits: set[str] = set()
    for client in scenario.clients:
        for payload in client.wire_log:
            wire_hits.update(find_leaks(payload.decode("utf-8"), secrets))
    with tempfile.TemporaryDirectory() as tmp:
        state_path = Path(tmp) / "state.jsonl"
        scenario.server.persist(state_path)
        state = find_leaks(state_path.read_text(encoding="utf-8"), secrets)
    return {"shared": shared, "wire": tuple(sorted(wire_hits)),
            "state": state}


# ---------------------------------------------------------------------------
# Dictionary attack
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AttackResult:
    pool_size: int
    hidden_hashes: int
    truth_in_pool: bool
    matches: tuple[tuple[str, str], ...]


def dictionary_attack_sim(scenario: E2EScenario, pool_size: int = 10_000,
                          seed: int = 2024) -> AttackResult:
    """Hash a large guess pool client-side and look for the shared hashes.

    The pool deliberately contains every true personal string; without the
    server salt even a correct guess produces a different digest, so the
    expected match count is zero.
    """
    hidden = frozenset(re.findall(r"[0-9a-f]{128}", scenario.result.text))
    bp = scenario.population.blueprint
    contexts = sorted({snap.context
                       for m in scenario.population.members
                       for snap in m.app.screens.values()},
                      key=lambda c: (c.package_name, c.activity_name))
    pool: dict[str, None] = {}
    for secret in sorted(scenario.population.personal_contents()):
        pool[secret] = None
    for content in sorted(app_contents(scenario.population.author.app)):
        pool[content] = None
    rng = random.Random(seed)
    while len(pool) < pool_size:
        for value in bp.sample(rng).values():
            if value.strip():
                pool[value] = None
    candidates = list(pool)[:pool_size]
    matches = tuple(
        (candidate, f"{ctx.package_name}/{ctx.activity_name}")
        for candidate in candidates
        for ctx in contexts
        if client_hash_pair(ctx, candidate).hex in hidden)
    truth_in_pool = scenario.population.personal_contents() <= set(candidates)
    return AttackResult(pool_size=len(candidates),
                        hidden_hashes=len(hidden),
                        truth_in_pool=truth_in_pool, matches=matches)
