"""Scenario scripts: schema validation, world setup, execution and replay.

A script declares actors and an ordered list of steps.  Flow steps poke an
actor to start a protocol flow and then let the network run until it is
idle (or for ``wait`` ticks).  Assertion steps inspect the resulting state
and never send messages.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema

from .. import codec
from ..asset import TrustBundle, verify_provenance
from ..errors import SchemaError, StepFailure, UnknownActor, UsoError
from .actors import (
    BankActor,
    BoardActor,
    Consumer,
    Directory,
    DLTActor,
    DoubleSpender,
    MinterActor,
    ProviderActor,
    RootWatcher,
    control,
    possession,
)
from .messages import FIGURES
from .transport import Network, Transcript

BUNDLED = ("fig2_chaum", "fig3_zkp", "fig4_sender", "fig4_recipient",
           "chaum_withdraw_transfer_redeem", "double_spend", "equivocation", "anchored_stack")


def schema() -> dict:
    return json.loads(resources.files("uso.sim").joinpath("scenario.schema.json").read_text())


def bundled_path(name: str):
    stem = name[:-5] if name.endswith(".json") else name
    return resources.files("uso.sim").joinpath("scenarios", stem + ".json")


def load_script(source) -> dict:
    """Accept a dict, a path, or the name of a bundled scenario."""
    if isinstance(source, dict):
        script = source
    else:
        path = Path(source)
        if path.is_file():
            text = path.read_text()
        else:
            candidate = bundled_path(path.name)
            if not candidate.is_file():
                raise SchemaError(f"no scenario file or bundled scenario named {source!r}")
            text = candidate.read_text()
        try:
            script = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"scenario is not valid JSON: {exc}") from exc
    try:
        jsonschema.validate(script, schema())
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path)
        raise SchemaError(f"{where or 'script'}: {exc.message}") from None
    return script


@dataclass
class AssertionResult:
    index: int
    op: str
    ok: bool
    detail: str = ""


@dataclass
class RunResult:
    name: str
    seed: int
    transcript: Transcript
    world: World
    assertions: list[AssertionResult] = field(default_factory=list)

    @property
    def failures(self) -> list[AssertionResult]:
        return [a for a in self.assertions if not a.ok]

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> dict:
        return {
            "scenario": self.name,
            "seed": self.seed,
            "messages": len(self.transcript),
            "assertions": len(self.assertions),
            "failures": [a.__dict__ for a in self.failures],
            "ok": self.ok,
        }


class World:
    """Actors, network and public directory for one run."""

    def __init__(self, script: dict, seed: int):
        self.seed = seed
        self.net = Network()
        self.directory = Directory()
        self.actors: dict = {}
        self.double_spends: dict[str, tuple[list[str], str]] = {}
        decls = {d["id"]: d for d in script["actors"]}
        if len(decls) != len(script["actors"]):
            raise SchemaError("duplicate actor id")
        self._check_refs(decls)
        order = {"bank": 0, "minter": 1}
        for d in sorted(script["actors"], key=lambda d: order.get(d["type"], 2)):
            self._build(d, decls)
        self._wire()

    def rng(self, actor_id: str) -> random.Random:
        return random.Random(f"{self.seed}:{actor_id}")

    def _check_refs(self, decls):
        for d in decls.values():
            for ref in ("bank", "minter", "board", "anchor_to"):
                if ref in d and d[ref] not in decls:
                    raise UnknownActor(f"{d['id']} refers to undeclared actor {d[ref]!r}")

    def _build(self, d: dict, decls: dict):
        aid, kind, rng = d["id"], d["type"], self.rng(d["id"])
        if kind in ("consumer", "double-spender"):
            cls = DoubleSpender if kind == "double-spender" else Consumer
            actor = cls(aid, self.directory, rng)
        elif kind == "bank":
            actor = BankActor(aid, self.directory, rng, d["minter"], d.get("board"))
        elif kind == "minter":
            bank = self.actors.get(d["bank"])
            if not isinstance(bank, BankActor):
                raise UnknownActor(f"{aid} needs bank {d['bank']!r}")
            actor = MinterActor(aid, self.directory, rng, bank.bank.public, d.get("bits", 2048))
        elif kind in ("provider", "equivocating-provider"):
            actor = ProviderActor(aid, self.directory, rng, d.get("ledger", aid), d.get("close", "manual"),
                                  d.get("anchor_to"), kind == "equivocating-provider")
        elif kind == "bulletin-board":
            actor = BoardActor(aid, self.directory, rng, d.get("ledger", aid))
        else:
            actor = DLTActor(aid, self.directory, rng, d.get("participants", 3), d.get("anchor_to"))
        self.actors[aid] = actor
        self.net.attach(actor)
        actor.decl = d

    def _wire(self):
        watchers = [a.id for a in self.actors.values() if isinstance(a, RootWatcher)]
        banks = [a for a in self.actors.values() if isinstance(a, BankActor)]
        for a in self.actors.values():
            if isinstance(a, MinterActor):
                self.directory.issuer_keys.update(a.minter.public_keys.values())
                for b in banks:
                    if b.minter == a.id:
                        b.bank.recognise_minter(a.minter.public_keys)
        for b in banks:
            self.directory.issuer_keys.add(b.bank.public)
            self.directory.sinks[b.id] = b.bank.sink.public
        for a in self.actors.values():
            if isinstance(a, ProviderActor):
                if a.ledger_id in self.directory.providers:
                    raise SchemaError(f"two providers claim ledger {a.ledger_id!r}")
                self.directory.providers[a.ledger_id] = a.id
                a.subscribers = list(watchers)
            if isinstance(a, BoardActor):
                a.provider.bank_keys = {b.bank.public for b in banks}
            if isinstance(a, Consumer) and "balance" in a.decl:
                bank = self.actors.get(a.decl.get("bank")) if "bank" in a.decl else (banks[0] if banks else None)
                if not isinstance(bank, BankActor):
                    raise UnknownActor(f"{a.id} has a balance but no bank")
                bank.bank.open_account(a.account, a.decl["balance"])
        # every ledger publishes its genesis root before the first step
        for a in self.actors.values():
            if isinstance(a, ProviderActor):
                a.close()
        self.net.run_until_idle()

    def actor(self, aid: str, cls=None):
        a = self.actors.get(aid)
        if a is None:
            raise UnknownActor(f"undeclared actor {aid!r}")
        if cls is not None and not isinstance(a, cls):
            raise UnknownActor(f"{aid!r} is not a {cls.role}")
        return a

    def provider_of(self, ledger_id: str) -> ProviderActor:
        return self.actor(self.directory.provider_actor(ledger_id), ProviderActor)

    def trust_bundle(self) -> TrustBundle:
        roots = []
        for a in self.actors.values():
            if isinstance(a, ProviderActor):
                roots.extend(a.provider.roots())
        return TrustBundle(tuple(sorted(self.directory.issuer_keys, key=codec.encode)), tuple(roots))


# -- structural diff against the figures ----------------------------------------

def figure_diff(transcript: Transcript, figure: str, flow: str, roles: dict[str, str]) -> list[str]:
    """Differences between a flow's (sender, receiver, label) sequence and a figure."""
    expected = [(roles.get(s, s), roles.get(d, d), text) for s, d, text in FIGURES[figure]]
    actual = [(r.src, r.dst, r.label) for r in transcript.flow(flow)]
    diffs = []
    for i in range(max(len(expected), len(actual))):
        e = expected[i] if i < len(expected) else None
        a = actual[i] if i < len(actual) else None
        if e != a:
            diffs.append(f"#{i + 1}: expected {e}, got {a}")
    return diffs


# -- step execution --------------------------------------------------------------

class Runner:
    def __init__(self, script: dict, seed: int | None = None):
        self.script = script
        self.seed = script["seed"] if seed is None else seed
        self.world = World(script, self.seed)
        self.results: list[AssertionResult] = []

    def run(self) -> RunResult:
        for i, step in enumerate(self.script["steps"]):
            op = step["op"]
            if op.startswith("assert-"):
                self.results.append(self._assert(i, step))
                continue
            try:
                getattr(self, "do_" + op.replace("-", "_"))(i, step)
            except UnknownActor:
                raise
            except (UsoError, KeyError, ValueError) as exc:
                raise StepFailure(f"step {i} ({op}) failed: {exc}", index=i) from exc
            if "wait" in step:
                self.world.net.advance(step["wait"])
            else:
                self.world.net.run_until_idle()
        return RunResult(self.script["name"], self.seed, self.world.net.transcript, self.world, self.results)

    def _flow(self, i, step):
        return step.get("flow", f"step{i}")

    def _a(self, aid, cls=None):
        return self.world.actor(aid, cls)

    # flows --------------------------------------------------------------------
    def do_withdraw_chaum(self, i, step, method="chaum"):
        self._a(step["bank"], BankActor)
        ledger = self.world.actor(step["provider"], ProviderActor).ledger_id
        self._a(step["actor"], Consumer).start_withdraw(
            self._flow(i, step), method, step["bank"], step["amount"], ledger, step["asset"])

    def do_withdraw_zkp(self, i, step):
        self.do_withdraw_chaum(i, step, "zkp")

    def do_transfer(self, i, step):
        flow = self._flow(i, step)
        sender = self._a(step["from"], Consumer)
        recipient = self._a(step["to"], Consumer)
        sender.offer(flow, step["asset"], recipient.id, step["mode"])
        recipient.start_receive(flow, sender.id, step.get("as", step["asset"]), step["mode"])

    def do_double_spend(self, i, step):
        flow = self._flow(i, step)
        spender = self._a(step["actor"], DoubleSpender)
        takers = list(step["to"])
        spender.rng.shuffle(takers)
        for r in takers:
            recipient = self._a(r, Consumer)
            sub = f"{flow}:{r}"
            spender.offer(sub, step["asset"], r, "recipient")
            recipient.start_receive(sub, spender.id, step.get("as", step["asset"]), "recipient")
        self.world.double_spends[flow] = (list(step["to"]), step.get("as", step["asset"]))

    def do_redeem(self, i, step):
        c = self._a(step["actor"], Consumer)
        self._a(step["bank"], BankActor)
        if step.get("replay"):
            c.replay_redeem(self._flow(i, step), step["asset"], step["bank"])
        else:
            c.start_redeem(self._flow(i, step), step["asset"], step["bank"])

    def do_close_epoch(self, i, step):
        self._a(step["provider"], ProviderActor).close()

    def do_fork_provider(self, i, step):
        self._a(step["provider"], ProviderActor).fork(step["views"])

    def do_gossip(self, i, step):
        peers = step["actors"]
        for p in peers:
            self._a(p, RootWatcher)
        for p in peers:
            self._a(p).gossip(peers)

    def do_submit_roots(self, i, step):
        self._a(step["dlt"], DLTActor)
        self._a(step["actor"], RootWatcher).submit_roots(step["dlt"])

    def do_anchor(self, i, step):
        self._a(step["dlt"], DLTActor).tick()

    def do_advance(self, i, step):
        self.world.net.advance(step["ticks"])

    def do_set_delay(self, i, step):
        self._a(step["from"])
        self._a(step["to"])
        self.world.net.set_delay(step["from"], step["to"], step["ticks"])

    def do_prove_stacked(self, i, step):
        self._a(step["dlt"], DLTActor)
        if "higher" in step:
            self._a(step["higher"], DLTActor)
        self._a(step["actor"], Consumer).start_stack(self._flow(i, step), step["asset"], step["dlt"],
                                                     step.get("higher"))

    # assertions ---------------------------------------------------------------
    def _assert(self, i, step) -> AssertionResult:
        op = step["op"]
        try:
            ok, detail = getattr(self, "check_" + op[len("assert-"):].replace("-", "_"))(step)
        except UnknownActor:
            raise
        except (UsoError, KeyError) as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        return AssertionResult(i, op, ok, "" if ok else detail)

    def check_holding(self, step):
        present = step["asset"] in self._a(step["actor"], Consumer).holdings
        want = step.get("present", True)
        return present == want, f"holding present={present}, expected {want}"

    def check_provenance(self, step):
        c = self._a(step["actor"], Consumer)
        h = c.holdings[step["asset"]]
        report = verify_provenance(h.asset, h.provenance, c.policy())
        want = step.get("ok", True)
        missing = set(step.get("codes", ())) - report.codes
        return report.ok == want and not missing, report.summary()

    def check_possession(self, step):
        got = possession(self._a(step["actor"], Consumer), step["asset"])
        want = step.get("expect", True)
        return got == want, f"possession={got}, expected {want}"

    def check_control(self, step):
        c = self._a(step["actor"], Consumer)
        h = c.holdings.get(step["asset"])
        got = False
        if h is not None:
            a = h.asset
            ledger = a.provider_for(len(a.updates)).ledger_id if a.updates else a.genesis.vector.ledger_ref.ledger_id
            got = control(self.world.provider_of(ledger).provider, c, step["asset"])
        want = step.get("expect", True)
        return got == want, f"control={got}, expected {want}"

    def check_error(self, step):
        a = self._a(step["actor"])
        f = step["flow"]
        codes = [code for flow, code in a.inbox_errors if flow in (f, f + "/auth") or flow.startswith(f + ":")]
        return step["code"] in codes, f"errors seen on {step['flow']}: {codes}"

    def check_credit(self, step):
        bal = self._a(step["bank"], BankActor).bank.balances.get(step["account"], 0)
        return bal == step["balance"], f"balance {bal}, expected {step['balance']}"

    def check_equivocation(self, step):
        a = self._a(step["actor"])
        ev = list(getattr(a, "evidence", []))
        got = bool(ev) and all(e.verify() for e in ev)
        want = step.get("expect", True)
        return got == want, f"{len(ev)} pieces of evidence, expected {'some' if want else 'none'}"

    def check_figure(self, step):
        diffs = figure_diff(self.world.net.transcript, step["figure"], step["flow"], step["roles"])
        return not diffs, "; ".join(diffs)

    def check_winner(self, step):
        takers, name = self.world.double_spends[step["flow"]]
        winners = [r for r in takers if possession(self._a(r), name)]
        losers_dup = [r for r in takers if r not in winners and
                      "DUPLICATE_KEY" in self._a(r).flows[f"{step['flow']}:{r}"].errors]
        ok = len(winners) == 1 and len(losers_dup) == len(takers) - 1
        return ok, f"winners={winners}, losers with DUPLICATE_KEY={losers_dup}"

    def check_stacked(self, step):
        got = self._a(step["actor"], Consumer).stacks.get(step["flow"])
        want = step.get("ok", True)
        return got == want, f"stacked proof verified={got}, expected {want}"

    def check_flow(self, step):
        st = self._a(step["actor"]).flows.get(step["flow"])
        got = st.status if st else None
        want = step.get("status", "done")
        return got == want, f"flow status {got}, expected {want}"


def run(script, seed: int | None = None) -> RunResult:
    """Run a scenario (dict, path or bundled name) and evaluate its assertions."""
    return Runner(load_script(script), seed).run()


def replay_check(script, transcript, seed: int | None = None) -> bool:
    """True iff a fresh run reproduces ``transcript`` bytewise."""
    text = transcript.to_jsonl() if isinstance(transcript, Transcript) else transcript
    try:
        return run(script, seed).transcript.to_jsonl() == text
    except UsoError:
        return False


def export(result: RunResult, directory) -> list[Path]:
    """Write every holding as asset/provenance files plus a trust file.

    Completed stacked proofs are written as ``{actor}.{flow}.stack`` with the
    top anchor root in hex beside them in ``{actor}.{flow}.top``.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for a in result.world.actors.values():
        if isinstance(a, Consumer):
            for name, h in sorted(a.holdings.items()):
                for suffix, obj in (("asset", h.asset), ("prov", h.provenance)):
                    p = out / f"{a.id}.{name}.{suffix}"
                    p.write_bytes(codec.dump_file(obj))
                    written.append(p)
            for flow, st in sorted(a.flows.items()):
                proof = st.data.get("proof") if isinstance(st.data, dict) else None
                if proof is None:
                    continue
                stem = f"{a.id}.{flow.replace('/', '_')}"
                p = out / f"{stem}.stack"
                p.write_bytes(codec.dump_file(proof))
                top = out / f"{stem}.top"
                top.write_text(st.data["top"].root.hex() + "\n")
                written += [p, top]
    p = out / "trust.bin"
    p.write_bytes(codec.dump_file(result.world.trust_bundle()))
    written.append(p)
    return written
