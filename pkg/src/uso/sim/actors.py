"""Simulated actors.

Each actor is a serialized state machine.  It owns its library objects
(wallet, provider, bank, ...) and reacts only to :class:`Message` deliveries,
whose bodies it decodes from canonical bytes.  The scenario runner starts
flows by calling ``start_*`` methods, which is the simulated equivalent of a
user pressing a button; everything after that travels over the network.

Public keys (issuer keys, provider locations, bank sink keys) come from a
shared read-only :class:`Directory`, standing in for a PKI.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .. import codec
from ..anchoring import (
    DLT,
    EquivocationEvidence,
    StackedProof,
    asset_layer,
    find_equivocations,
    verify_stacked,
)
from ..asset import (
    DirectGenesis,
    Holding,
    IssuerPolicy,
    LedgerRef,
    ProvenanceEntry,
    TransferBundle,
    UpdateKind,
    UpdateVector,
    Wallet,
    check_incoming,
    create_genesis,
    make_update,
    verify_provenance,
)
from ..crypto import (
    BlindSignature,
    VerifyingKey,
    blind,
    commit,
    generate_keypair,
    prove_linkage,
    unblind,
)
from ..errors import (
    AuthRefused,
    KeyNotFound,
    MalformedEncoding,
    NotAnchored,
    UnknownActor,
    UsoError,
)
from ..ledger import EquivocatingProvider, IntegrityProvider, Registration, SignedRoot
from ..mint import (
    Bank,
    BlindInitRequest,
    BlindInitResponse,
    BoardPost,
    BoardReceipt,
    BulletinBoard,
    BurnGenesis,
    CommitRequest,
    Credit,
    MintRequest,
    Minter,
    RedemptionRequest,
    WithdrawalAuthorisation,
    WithdrawRequest,
    mint_message,
)
from .messages import AnchorProof, AnchorQuery, AuthRequest, ErrorReply, ProofQuery, RootList, label
from .transport import Message


@dataclass
class Directory:
    """Public information every actor may read."""

    issuer_keys: set = field(default_factory=set)
    providers: dict[str, str] = field(default_factory=dict)
    sinks: dict[str, VerifyingKey] = field(default_factory=dict)

    def provider_actor(self, ledger_id: str) -> str:
        try:
            return self.providers[ledger_id]
        except KeyError:
            raise UnknownActor(f"no provider for ledger {ledger_id!r}") from None


@dataclass
class FlowState:
    kind: str
    status: str = "started"
    errors: list[str] = field(default_factory=list)
    data: dict = field(default_factory=dict)


class Actor:
    role = "actor"

    def __init__(self, actor_id: str, directory: Directory, rng):
        self.id = actor_id
        self.directory = directory
        self.rng = rng
        self.net = None
        self.flows: dict[str, FlowState] = {}
        self.inbox_errors: list[tuple[str, str]] = []

    # -- plumbing --------------------------------------------------------------
    def send(self, dst: str, kind: str, obj, label: str = "", flow: str = "", reply_label: str = ""):
        self.net.send(Message(self.id, dst, kind, codec.encode(obj), label, flow, reply_label))

    def deliver(self, msg: Message):
        try:
            obj = codec.decode(msg.body)
        except MalformedEncoding as exc:
            self._fail(msg, exc)
            return
        handler = getattr(self, "on_" + msg.kind.lower(), None)
        try:
            if handler is None:
                raise UsoError(f"{self.role} has no {msg.kind} endpoint")
            handler(msg, obj)
        except UsoError as exc:
            self._fail(msg, exc)

    def _fail(self, msg: Message, exc: UsoError):
        self.record_error(msg.flow, exc.code)
        if msg.kind != "ERROR":
            self.send(msg.src, "ERROR", ErrorReply(exc.code, str(exc)), f"error {exc.code}", msg.flow)

    def record_error(self, flow: str, code: str):
        self.inbox_errors.append((flow, code))
        st = self.flows.get(flow.removesuffix("/auth"))
        if st is not None:
            st.errors.append(code)
            st.status = "failed"

    def on_error(self, msg: Message, err: ErrorReply):
        self.record_error(msg.flow, err.code)

    def flow(self, flow_id: str) -> FlowState:
        try:
            return self.flows[flow_id]
        except KeyError:
            raise UsoError(f"{self.id} knows no flow {flow_id!r}") from None


class RootWatcher(Actor):
    """Keeps every root it has seen and checks them for equivocation."""

    def __init__(self, actor_id, directory, rng):
        super().__init__(actor_id, directory, rng)
        self.roots: dict[tuple[str, int], list[SignedRoot]] = {}
        self.evidence: list[EquivocationEvidence] = []

    def learn_root(self, root: SignedRoot):
        if not root.verify():
            return
        seen = self.roots.setdefault((root.ledger_id, root.epoch), [])
        if all(r.root != root.root for r in seen):
            seen.append(root)
            if len(seen) > 1:
                self.evidence.extend(ev for ev in find_equivocations(seen) if ev not in self.evidence)

    def all_roots(self) -> list[SignedRoot]:
        return [r for k in sorted(self.roots) for r in self.roots[k]]

    def resolve(self, ledger_id: str, epoch: int) -> SignedRoot | None:
        seen = self.roots.get((ledger_id, epoch))
        return seen[0] if seen else None

    def latest_epoch(self, ledger_id: str) -> int:
        epochs = [e for (lid, e) in self.roots if lid == ledger_id]
        if not epochs:
            raise UsoError(f"{self.id} has seen no root of {ledger_id!r}")
        return max(epochs)

    def policy(self) -> IssuerPolicy:
        return IssuerPolicy(self.directory.issuer_keys, self.resolve)

    def on_root_announce(self, msg, root: SignedRoot):
        self.learn_root(root)

    def on_root_gossip(self, msg, roots: RootList):
        for r in roots.roots:
            self.learn_root(r)

    def gossip(self, peers):
        for p in peers:
            if p != self.id:
                self.send(p, "ROOT_GOSSIP", RootList(tuple(self.all_roots())), "roots", "gossip")

    def submit_roots(self, dlt: str):
        for r in self.all_roots():
            self.send(dlt, "SUBMIT_ROOT", r, "G_L,i", "anchor")


# -- consumers -----------------------------------------------------------------

class Consumer(RootWatcher):
    role = "consumer"

    def __init__(self, actor_id, directory, rng, account: str | None = None):
        super().__init__(actor_id, directory, rng)
        self.account = account or actor_id
        self.wallet = Wallet(rng)
        self.holdings: dict[str, Holding] = {}
        self.credits: list[Credit] = []
        self.redemptions: dict[str, RedemptionRequest] = {}
        self.stacks: dict[str, bool] = {}

    def _holding(self, name: str) -> Holding:
        try:
            return self.holdings[name]
        except KeyError:
            raise UsoError(f"{self.id} holds no asset {name!r}") from None

    # withdrawal -------------------------------------------------------------
    def start_withdraw(self, flow: str, method: str, bank: str, amount: int, ledger_id: str, name: str):
        ref = LedgerRef(ledger_id, self.latest_epoch(ledger_id))
        self.flows[flow] = FlowState(f"withdraw-{method}", data={"bank": bank, "ref": ref, "name": name})
        self.send(bank, "AUTHORISE", AuthRequest(self.account, amount), "w?", flow + "/auth")

    def on_authorised(self, msg, w: WithdrawalAuthorisation):
        flow = msg.flow.removesuffix("/auth")
        st = self.flow(flow)
        st.data["w"] = w
        bank = st.data["bank"]
        if st.kind == "withdraw-chaum":
            session = self.rng.randbytes(16)
            self.send(bank, "WITHDRAW_INIT", BlindInitRequest(w.amount, session), label("fig2", 1), flow)
        else:
            k1 = self.wallet.new_key()
            f0 = UpdateVector(mint_message(w.amount), st.data["ref"], k1)
            beta, nonce = commit(f0, generate_keypair(rng=self.rng), self.rng)
            st.data.update(f0=f0, beta=beta, nonce=nonce)
            self.send(bank, "WITHDRAW", CommitRequest(w, beta), label("fig3", 3), flow)

    def on_blind_init_ok(self, msg, resp: BlindInitResponse):
        st = self.flow(msg.flow)
        w = st.data["w"]
        if resp.denomination != w.amount:
            raise AuthRefused("minter answered for a different denomination")
        k1 = self.wallet.new_key()
        f0 = UpdateVector(mint_message(w.amount), st.data["ref"], k1)
        blinded, factor = blind(f0.digest(), resp.key, self.rng)
        st.data.update(f0=f0, factor=factor, issuer=resp.key)
        self.send(st.data["bank"], "WITHDRAW", WithdrawRequest(w, blinded), label("fig2", 5), msg.flow)

    def on_blind_sig(self, msg, bsig: BlindSignature):
        st = self.flow(msg.flow)
        f0 = st.data["f0"]
        sig = unblind(bsig, st.data["factor"])
        asset = create_genesis(f0.u, f0.ledger_ref, f0.next_key, DirectGenesis(st.data["issuer"], sig))
        self.holdings[st.data["name"]] = Holding(asset)
        st.status = "done"

    def on_bb_proof(self, msg, receipt: BoardReceipt):
        st = self.flow(msg.flow)
        f0 = st.data["f0"]
        if not receipt.verify() or receipt.entry.commitment != st.data["beta"]:
            raise AuthRefused("board receipt does not cover our commitment")
        self.learn_root(receipt.root)
        authority = BurnGenesis(prove_linkage(f0, st.data["nonce"], st.data["beta"]), receipt)
        asset = create_genesis(f0.u, f0.ledger_ref, f0.next_key, authority)
        self.holdings[st.data["name"]] = Holding(asset)
        st.status = "done"

    # sending ----------------------------------------------------------------
    def offer(self, flow: str, name: str, recipient: str, mode: str):
        """Prepare to transfer ``name`` once the recipient's key arrives."""
        self._holding(name)
        self.flows[flow] = FlowState("send", data={"name": name, "recipient": recipient, "mode": mode})

    def _sign_next(self, asset, u: bytes, next_key: VerifyingKey):
        return self.wallet.update(asset, u, None, next_key)

    def on_transfer_key(self, msg, next_key: VerifyingKey):
        st = self.flow(msg.flow)
        h = self._holding(st.data["name"])
        asset, _ = self._sign_next(h.asset, UpdateKind.TRANSFER, next_key)
        j = len(asset.updates)
        st.data.update(asset=asset, prior=h.provenance)
        if st.data["mode"] == "sender":
            relay = self.directory.provider_actor(asset.provider_for(j).ledger_id)
            self.send(relay, "SUBMIT", asset.registration_for(j), label("fig4-sender", 2), msg.flow,
                      reply_label=label("fig4-sender", 3))
        else:
            bundle = TransferBundle(asset, h.provenance, asset.registration_for(j))
            del self.holdings[st.data["name"]]
            st.status = "sent"
            self.send(st.data["recipient"], "TRANSFER_BUNDLE", bundle, label("fig4-recipient", 2), msg.flow)

    def on_proof(self, msg, entry: ProvenanceEntry):
        st = self.flow(msg.flow)
        self.learn_root(entry.root)
        provenance = st.data["prior"].extend(entry)
        if st.kind == "send":
            bundle = TransferBundle(st.data["asset"], provenance)
            del self.holdings[st.data["name"]]
            st.status = "done"
            self.send(st.data["recipient"], "TRANSFER_BUNDLE", bundle, label("fig4-sender", 4), msg.flow)
        elif st.kind == "redeem":
            req = RedemptionRequest(st.data["account"], st.data["asset"], provenance)
            self.redemptions[st.data["name"]] = req
            del self.holdings[st.data["name"]]
            self.send(st.data["bank"], "REDEEM", req, "F_j,P_j", msg.flow)
        else:
            h = self.holdings[st.data["name"]]
            self.holdings[st.data["name"]] = Holding(h.asset, provenance)
            st.status = "done"
            self.send(st.data["sender"], "TRANSFER_CONFIRM", entry, label("fig4-recipient", 5), msg.flow)

    def on_transfer_confirm(self, msg, entry: ProvenanceEntry):
        st = self.flow(msg.flow)
        self.learn_root(entry.root)
        st.status = "done"

    # receiving --------------------------------------------------------------
    def start_receive(self, flow: str, sender: str, name: str, mode: str):
        key = self.wallet.new_key()
        self.flows[flow] = FlowState("receive", data={"sender": sender, "name": name, "mode": mode, "key": key})
        fig = "fig4-sender" if mode == "sender" else "fig4-recipient"
        self.send(sender, "TRANSFER_KEY", key, label(fig, 1), flow)

    def on_transfer_bundle(self, msg, bundle: TransferBundle):
        st = self.flow(msg.flow)
        report = check_incoming(bundle, st.data["key"], self.policy())
        st.data["report"] = report
        if st.data["mode"] == "sender":
            if not report.ok:
                raise UsoError(report.summary())
            self.holdings[st.data["name"]] = Holding(bundle.asset, bundle.provenance)
            st.status = "done"
            return
        # Register first: control can precede a full check of the materials.
        asset = bundle.asset
        j = len(asset.updates)
        self.holdings[st.data["name"]] = Holding(asset, bundle.provenance)
        st.data.update(asset=asset, prior=bundle.provenance)
        relay = self.directory.provider_actor(asset.provider_for(j).ledger_id)
        self.send(relay, "SUBMIT", bundle.registration, label("fig4-recipient", 3), msg.flow,
                  reply_label=label("fig4-recipient", 4))

    # redemption -------------------------------------------------------------
    def start_redeem(self, flow: str, name: str, bank: str):
        h = self._holding(name)
        self.flows[flow] = FlowState("redeem", data={"name": name, "bank": bank, "account": self.account})
        asset, _ = self._sign_next(h.asset, UpdateKind.REDEEM, self.directory.sinks[bank])
        j = len(asset.updates)
        self.flows[flow].data.update(asset=asset, prior=h.provenance)
        relay = self.directory.provider_actor(asset.provider_for(j).ledger_id)
        self.send(relay, "SUBMIT", asset.registration_for(j), "k_j,s(h(F_j),k_j)", flow,
                  reply_label="p(G_L,i,k_j,h(F_j))")

    def replay_redeem(self, flow: str, name: str, bank: str):
        req = self.redemptions.get(name)
        if req is None:
            raise UsoError(f"{self.id} has not redeemed {name!r}")
        self.flows[flow] = FlowState("redeem-replay", data={"name": name, "bank": bank})
        self.send(bank, "REDEEM", req, "F_j,P_j", flow)

    def on_credit(self, msg, credit: Credit):
        self.credits.append(credit)
        self.flow(msg.flow).status = "done"

    # stacked proofs ---------------------------------------------------------
    def start_stack(self, flow: str, name: str, dlt: str, higher: str | None):
        h = self._holding(name)
        if not h.provenance.entries:
            raise UsoError(f"{name!r} has no registered update")
        entry = h.provenance.entries[-1]
        upd = h.asset.updates[len(h.provenance.entries) - 1]
        self.flows[flow] = FlowState("stack", data={
            "layers": [asset_layer(entry.proof, upd.sig)], "higher": higher, "top": None})
        self.send(dlt, "PROVE_ANCHORED", AnchorQuery(entry.root.ledger_id, entry.root.epoch), "p(G_D,t,k_L,G_L)", flow)

    def on_anchor_proof(self, msg, ap: AnchorProof):
        st = self.flow(msg.flow)
        st.data["layers"].append(ap.layer)
        st.data["top"] = ap.anchor
        higher = st.data.pop("higher")
        if higher:
            st.data["higher"] = None
            q = AnchorQuery(ap.published.ledger_id, ap.published.epoch)
            self.send(higher, "PROVE_ANCHORED", q, "p(G_H,t,k_D,G_D)", msg.flow)
            return
        proof = StackedProof(tuple(st.data["layers"]))
        ok = ap.anchor.verify() and verify_stacked(proof, ap.anchor.root)
        st.data["proof"] = proof
        self.stacks[msg.flow] = ok
        st.status = "done" if ok else "failed"


class DoubleSpender(Consumer):
    """Signs a different update with the same one-time key for every taker."""

    def _sign_next(self, asset, u: bytes, next_key: VerifyingKey):
        # deliberately skips key retirement so the key can sign again
        return make_update(asset, u, None, next_key, self.wallet._keys[asset.current_key])

    def on_transfer_key(self, msg, next_key: VerifyingKey):
        st = self.flow(msg.flow)
        name = st.data["name"]
        h = self._holding(name)
        super().on_transfer_key(msg, next_key)
        self.holdings.setdefault(name, h)


# -- issuer side ---------------------------------------------------------------

class BankActor(RootWatcher):
    role = "bank"

    def __init__(self, actor_id, directory, rng, minter: str, board: str | None = None):
        super().__init__(actor_id, directory, rng)
        self.bank = Bank(actor_id, rng)
        self.minter = minter
        self.board = board
        self.owner: dict[str, str] = {}

    def on_authorise(self, msg, req: AuthRequest):
        if req.account != msg.src:
            raise AuthRefused("accounts may only be debited by their owner")
        self.send(msg.src, "AUTHORISED", self.bank.authorise(req.account, req.amount), "w", msg.flow)

    def on_withdraw_init(self, msg, req: BlindInitRequest):
        self.owner[msg.flow] = msg.src
        self.send(self.minter, "WITHDRAW_INIT", self.bank.relay_init(req), label("fig2", 2), msg.flow)

    def on_blind_init_ok(self, msg, resp: BlindInitResponse):
        self.send(self.owner[msg.flow], "BLIND_INIT_OK", self.bank.relay_init_response(resp),
                  label("fig2", 4), msg.flow)

    def on_withdraw(self, msg, req):
        self.owner[msg.flow] = msg.src
        if isinstance(req, WithdrawRequest):
            self.send(self.minter, "MINT", self.bank.withdraw(req), label("fig2", 6), msg.flow)
        elif isinstance(req, CommitRequest):
            if self.board is None:
                raise AuthRefused("this bank has no bulletin board")
            self.send(self.board, "BB_POST", self.bank.post_commitment(req), label("fig3", 4), msg.flow)
        else:
            raise MalformedEncoding("unexpected withdrawal body")

    def on_blind_sig(self, msg, sig: BlindSignature):
        self.send(self.owner[msg.flow], "BLIND_SIG", self.bank.relay_signature(sig), label("fig2", 8), msg.flow)

    def on_bb_proof(self, msg, receipt: BoardReceipt):
        self.send(self.owner[msg.flow], "BB_PROOF", self.bank.relay_receipt(receipt), label("fig3", 6), msg.flow)

    def on_redeem(self, msg, req: RedemptionRequest):
        credit = self.bank.redeem(req, self.policy())
        self.send(msg.src, "CREDIT", credit, "credit", msg.flow)

    def on_error(self, msg, err: ErrorReply):
        super().on_error(msg, err)
        owner = self.owner.get(msg.flow)
        if owner is not None and msg.src != owner:
            self.send(owner, "ERROR", err, f"error {err.code}", msg.flow)


class MinterActor(Actor):
    role = "minter"

    def __init__(self, actor_id, directory, rng, bank_key: VerifyingKey, bits: int = 2048):
        super().__init__(actor_id, directory, rng)
        self.minter = Minter(bank_key, rng, bits=bits)

    def on_withdraw_init(self, msg, req: BlindInitRequest):
        self.send(msg.src, "BLIND_INIT_OK", self.minter.init_blind(req), label("fig2", 3), msg.flow)

    def on_mint(self, msg, req: MintRequest):
        self.send(msg.src, "BLIND_SIG", self.minter.mint(req), label("fig2", 7), msg.flow)


# -- ledgers -------------------------------------------------------------------

class ProviderActor(Actor):
    """Integrity provider endpoint.

    With ``close="auto"`` an epoch closes one tick after the first pending
    submission; with ``"manual"`` only the scenario clock closes epochs.
    """

    role = "provider"

    def __init__(self, actor_id, directory, rng, ledger_id: str, close: str = "manual",
                 anchor_to: str | None = None, equivocating: bool = False, provider=None):
        super().__init__(actor_id, directory, rng)
        if provider is None:
            cls = EquivocatingProvider if equivocating else IntegrityProvider
            provider = cls(ledger_id, generate_keypair(rng=rng))
        self.provider = provider
        self.close_mode = close
        self.anchor_to = anchor_to
        self.subscribers: list[str] = []
        self.views: dict[str, str] = {}
        self.waiting: list[tuple[str, str, VerifyingKey, str]] = []
        self._close_scheduled = False

    @property
    def ledger_id(self) -> str:
        return self.provider.ledger_id

    def on_submit(self, msg, reg: Registration):
        self.provider.submit_registration(reg)
        self.waiting.append((msg.src, msg.flow, reg.key, msg.reply_label))
        if self.close_mode == "auto" and not self._close_scheduled:
            self._close_scheduled = True
            self.net.schedule(1, self.close)

    def close(self):
        self._close_scheduled = False
        honest = self.provider.close_epoch()
        e = honest.epoch
        for sub in self.subscribers:
            self.send(sub, "ROOT_ANNOUNCE", self.root_for(sub, e), "G_L,i", "announce")
        if self.anchor_to:
            self.send(self.anchor_to, "SUBMIT_ROOT", honest, "G_L,i", "anchor")
        waiting, self.waiting = self.waiting, []
        for src, flow, key, reply_label in waiting:
            entry = ProvenanceEntry(self.provider.fetch_proof(key, e), self.root_for(src, e))
            self.send(src, "PROOF", entry, reply_label or "p(G_L,i,k_j,h(F_j))", flow)
        return honest

    def fork(self, views: dict[str, str], phantoms=None):
        if not isinstance(self.provider, EquivocatingProvider):
            raise UsoError(f"{self.id} is an honest provider")
        self.provider.fork_next_close(phantoms)
        self.views = dict(views)

    def root_for(self, actor: str, epoch: int) -> SignedRoot:
        if isinstance(self.provider, EquivocatingProvider):
            return self.provider.get_signed_root(epoch, self.views.get(actor, "A"))
        return self.provider.get_signed_root(epoch)

    def on_fetch_proof(self, msg, q: ProofQuery):
        entry = ProvenanceEntry(self.provider.fetch_proof(q.key, q.epoch), self.root_for(msg.src, q.epoch))
        self.send(msg.src, "PROOF", entry, msg.reply_label or "p(G_L,i,k_j,h(F_j))", msg.flow)

    def on_fetch_exclusion(self, msg, q: ProofQuery):
        self.send(msg.src, "EXCLUSION", self.provider.fetch_exclusion(q.key, q.epoch), "exclusion", msg.flow)

    def on_get_root(self, msg, q: AnchorQuery):
        self.send(msg.src, "ROOT_ANNOUNCE", self.root_for(msg.src, q.epoch), "G_L,i", msg.flow)


class BoardActor(ProviderActor):
    """Bulletin board: a provider that accepts bank posts and closes per post."""

    role = "bulletin_board"

    def __init__(self, actor_id, directory, rng, ledger_id: str):
        board = BulletinBoard(ledger_id, generate_keypair(rng=rng))
        super().__init__(actor_id, directory, rng, ledger_id, provider=board)

    def on_bb_post(self, msg, post: BoardPost):
        receipt = self.provider.post(post)
        for sub in self.subscribers:
            self.send(sub, "ROOT_ANNOUNCE", receipt.root, "G_BB,t", "announce")
        self.send(msg.src, "BB_PROOF", receipt, label("fig3", 5), msg.flow)


class DLTActor(Actor):
    role = "dlt"

    def __init__(self, actor_id, directory, rng, participants: int = 3, anchor_to: str | None = None):
        super().__init__(actor_id, directory, rng)
        parts = [generate_keypair(rng=rng) for _ in range(participants)]
        self.dlt = DLT(actor_id, parts, generate_keypair(rng=rng))
        self.anchor_to = anchor_to

    @property
    def evidence(self) -> list[EquivocationEvidence]:
        return self.dlt.evidence

    def on_submit_root(self, msg, root: SignedRoot):
        # a conflicting root raises; the DLT keeps the evidence and the
        # submitter receives the error code
        self.dlt.submit_root(root)

    def tick(self):
        anchored = self.dlt.anchor()
        if self.anchor_to:
            self.send(self.anchor_to, "SUBMIT_ROOT", self.dlt.signed_root(anchored.t), "G_D,t", "anchor")
        return anchored

    def on_prove_anchored(self, msg, q: AnchorQuery):
        hit = self.dlt.find(q.ledger_id, q.epoch)
        if hit is None:
            raise NotAnchored(f"{q.ledger_id}@{q.epoch} is not anchored")
        t, sr = hit
        ap = AnchorProof(self.dlt.layer(sr, t), self.dlt.get_anchor(t), self.dlt.signed_root(t))
        self.send(msg.src, "ANCHOR_PROOF", ap, "p(G_D,t,k_L,G_L)", msg.flow)

    def on_get_anchor(self, msg, q: AnchorQuery):
        self.send(msg.src, "ANCHOR", self.dlt.get_anchor(q.epoch), "G_D,t", msg.flow)


def possession(actor: Consumer, name: str) -> bool:
    """Holds the asset, addressed to one of its keys, with verifying provenance."""
    h = actor.holdings.get(name)
    if h is None or not actor.wallet.owns(h.asset.current_key):
        return False
    return verify_provenance(h.asset, h.provenance, actor.policy()).ok


def control(provider: IntegrityProvider, actor: Consumer, name: str) -> bool:
    """The latest update of the actor's copy is what the provider registered."""
    h = actor.holdings.get(name)
    if h is None or not actor.wallet.owns(h.asset.current_key):
        return False
    a = h.asset
    if not a.updates:
        return True
    try:
        return provider.registered_digest(a.signing_key_for(len(a.updates))) == a.updates[-1].vector.digest()
    except KeyNotFound:
        return False

