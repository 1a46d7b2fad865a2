"""DLT anchoring of provider roots, stacked proofs and equivocation evidence.

At each anchor tick ``t`` the DLT builds a trie mapping every submitting
operator's key to the SignedRoot it submitted, and all participants sign
``(dlt_id, t, G_D,t)``.  Because the leaf value is the whole SignedRoot, the
provider's own epoch index is recorded alongside ``t``.

A DLT can publish its own anchor as a SignedRoot, so it can in turn be
anchored by a higher ledger; proofs then stack layer by layer.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass

from . import codec
from .codec import canonical
from .crypto import Digest, HashTag, Signature, SigningKeyPair, VerifyingKey, sign, tagged_hash, verify
from .errors import (
    ConflictingSubmission,
    InvalidOperatorSig,
    KeyNotFound,
    MalformedEncoding,
    NotAnchored,
    UnknownEpoch,
)
from .ledger import SignedRoot, sign_root
from .trie import ProofOfInclusion, RootDigest, Trie, proof_root, value_digest, verify_inclusion


def anchor_message(dlt_id: str, t: int, root: Digest) -> Digest:
    w = codec.Writer()
    w.var(dlt_id.encode("utf-8"))
    w.u64(t)
    w.raw(root)
    return tagged_hash(HashTag.ANCHOR, w.getvalue())


@canonical(0x50)
@dataclass(frozen=True)
class ParticipantSig:
    participant: VerifyingKey
    sig: Signature


@canonical(0x51)
@dataclass(frozen=True)
class AnchorRoot:
    """``G_D,t`` with the participants' signatures."""

    dlt_id: str
    t: int
    root: Digest
    sigs: tuple[ParticipantSig, ...]

    def verify(self, participants=None) -> bool:
        msg = anchor_message(self.dlt_id, self.t, self.root)
        signers = {ps.participant for ps in self.sigs}
        if participants is not None and signers != set(participants):
            return False
        return bool(self.sigs) and all(verify(ps.participant, msg, ps.sig) for ps in self.sigs)

    @property
    def root_digest(self) -> RootDigest:
        return RootDigest(self.root)


@canonical(0x52)
@dataclass(frozen=True)
class EquivocationEvidence:
    """Two validly signed roots for one ``(ledger_id, epoch)`` that differ."""

    first: SignedRoot
    second: SignedRoot

    def verify(self) -> bool:
        a, b = self.first, self.second
        return (
            a.ledger_id == b.ledger_id
            and a.epoch == b.epoch
            and a.operator == b.operator
            and a.root != b.root
            and a.verify()
            and b.verify()
        )


@canonical(0x53)
@dataclass(frozen=True)
class StackLayer:
    """One inclusion proof plus the preimage of the value it binds."""

    proof: ProofOfInclusion
    value: bytes


@canonical(0x54)
@dataclass(frozen=True)
class StackedProof:
    layers: tuple[StackLayer, ...]

    def extend(self, layer: StackLayer) -> StackedProof:
        return StackedProof(self.layers + (layer,))


def dlt_key(operator: VerifyingKey) -> bytes:
    return codec.encode(operator)


def verify_stacked(proof: StackedProof, top_root) -> bool:
    """Every layer verifies and each layer's root is the next layer's leaf."""
    top = bytes(top_root.digest if isinstance(top_root, RootDigest) else top_root)
    if not proof.layers:
        return False
    below = None
    for i, layer in enumerate(proof.layers):
        p = layer.proof
        if value_digest(layer.value) != p.value_digest:
            return False
        r = proof_root(p)
        if r is None:
            return False
        if i > 0:
            try:
                sr = codec.decode(layer.value, SignedRoot)
            except MalformedEncoding:
                return False
            if sr.root != below or p.key != dlt_key(sr.operator) or not sr.verify():
                return False
        below = r
    return below == top


class DLT:
    """A single logical ledger with a fixed set of signing participants."""

    def __init__(self, dlt_id: str, participants: list[SigningKeyPair], operator: SigningKeyPair):
        if not participants:
            raise ValueError("a DLT needs at least one participant")
        self.dlt_id = dlt_id
        self.participants = participants
        self.operator = operator
        self.t = 0
        self._pending: dict[bytes, SignedRoot] = {}
        self._seen: dict[tuple, SignedRoot] = {}
        self._anchors: list[tuple[Trie, AnchorRoot]] = []
        self._anchored: list[list[SignedRoot]] = []
        self.evidence: list[EquivocationEvidence] = []

    @property
    def participant_keys(self) -> list[VerifyingKey]:
        return [p.public for p in self.participants]

    def submit_root(self, root: SignedRoot) -> None:
        if not root.verify():
            raise InvalidOperatorSig("operator signature on root does not verify")
        ident = (root.operator, root.ledger_id, root.epoch)
        prior = self._seen.get(ident)
        if prior is None:
            k = dlt_key(root.operator)
            pending = self._pending.get(k)
            if pending is not None and pending.root != root.root and pending.epoch == root.epoch:
                prior = pending
        if prior is not None and prior.root != root.root:
            ev = EquivocationEvidence(prior, root)
            self.evidence.append(ev)
            self._pending.pop(dlt_key(root.operator), None)
            raise ConflictingSubmission(f"{root.ledger_id} signed two roots for epoch {root.epoch}", evidence=ev)
        self._seen[ident] = root
        self._pending[dlt_key(root.operator)] = root

    def anchor(self) -> AnchorRoot:
        """Commit this tick's submissions and advance ``t``."""
        trie = Trie()
        for k in sorted(self._pending):
            trie = trie.insert(k, codec.encode(self._pending[k]))
        digest = trie.root().digest
        msg = anchor_message(self.dlt_id, self.t, digest)
        sigs = tuple(ParticipantSig(p.public, sign(p, msg)) for p in self.participants)
        anchored = AnchorRoot(self.dlt_id, self.t, digest, sigs)
        self._anchors.append((trie, anchored))
        self._anchored.append([self._pending[k] for k in sorted(self._pending)])
        self._pending = {}
        self.t += 1
        return anchored

    def anchor_submissions(self, submissions) -> tuple[AnchorRoot, list[EquivocationEvidence]]:
        found = []
        for root in submissions:
            try:
                self.submit_root(root)
            except ConflictingSubmission as exc:
                found.append(exc.evidence)
        return self.anchor(), found

    def _trie_at(self, t: int) -> Trie:
        if not 0 <= t < len(self._anchors):
            raise UnknownEpoch(f"no anchor at t={t}")
        return self._anchors[t][0]

    def get_anchor(self, t: int) -> AnchorRoot:
        self._trie_at(t)
        return self._anchors[t][1]

    def anchors(self) -> list[AnchorRoot]:
        return [a for _, a in self._anchors]

    def prove_anchored(self, operator: VerifyingKey, t: int) -> ProofOfInclusion:
        trie = self._trie_at(t)
        try:
            return trie.prove_inclusion(dlt_key(operator))
        except KeyNotFound:
            raise NotAnchored(f"operator not anchored at t={t}",
                              exclusion=trie.prove_exclusion(dlt_key(operator))) from None

    def anchored_root(self, operator: VerifyingKey, t: int) -> SignedRoot | None:
        for sr in self._anchored_at(t):
            if sr.operator == operator:
                return sr
        return None

    def _anchored_at(self, t: int) -> list[SignedRoot]:
        self._trie_at(t)
        return self._anchored[t]

    def find(self, ledger_id: str, epoch: int) -> tuple[int, SignedRoot] | None:
        """Earliest anchor containing that ledger epoch's root."""
        for t in range(len(self._anchors)):
            for sr in self._anchored_at(t):
                if sr.ledger_id == ledger_id and sr.epoch == epoch:
                    return t, sr
        return None

    def layer(self, root: SignedRoot, t: int) -> StackLayer:
        return StackLayer(self.prove_anchored(root.operator, t), codec.encode(root))

    def signed_root(self, t: int) -> SignedRoot:
        """This DLT's anchor at ``t`` as a root a higher ledger can anchor."""
        a = self.get_anchor(t)
        return sign_root(self.operator, self.dlt_id, t, a.root)


def asset_layer(proof: ProofOfInclusion, sig: Signature) -> StackLayer:
    """Bottom layer: an update registration proven in a provider root."""
    return StackLayer(proof, codec.encode(sig))


def find_equivocations(roots) -> list[EquivocationEvidence]:
    groups: dict[tuple, list[SignedRoot]] = defaultdict(list)
    for r in roots:
        if r.verify():
            groups[(r.operator, r.ledger_id, r.epoch)].append(r)
    found = []
    for rs in groups.values():
        first = rs[0]
        for other in rs[1:]:
            if other.root != first.root:
                found.append(EquivocationEvidence(first, other))
                break
    return found


def detect_equivocation(roots) -> EquivocationEvidence | None:
    found = find_equivocations(roots)
    return found[0] if found else None


class DirectResolver:
    """Trust each provider's own published roots."""

    def __init__(self, providers=()):
        self.providers = {p.ledger_id: p for p in providers}

    def add(self, provider):
        self.providers[provider.ledger_id] = provider

    def __call__(self, ledger_id: str, epoch: int) -> SignedRoot | None:
        p = self.providers.get(ledger_id)
        if p is None or not 0 <= epoch < p.open_epoch:
            return None
        return p.get_signed_root(epoch)


class StaticResolver:
    """Resolve from a fixed collection of roots (for example a trust file)."""

    def __init__(self, roots=()):
        self.roots = {(r.ledger_id, r.epoch): r for r in roots}

    def __call__(self, ledger_id: str, epoch: int) -> SignedRoot | None:
        return self.roots.get((ledger_id, epoch))


class AnchoredResolver:
    """Trust only roots that a DLT has anchored, with valid participant sigs."""

    def __init__(self, dlt: DLT):
        self.dlt = dlt

    def __call__(self, ledger_id: str, epoch: int) -> SignedRoot | None:
        hit = self.dlt.find(ledger_id, epoch)
        if hit is None:
            return None
        t, sr = hit
        if not self.dlt.get_anchor(t).verify(self.dlt.participant_keys):
            return None
        if not verify_inclusion(self.dlt.get_anchor(t).root, self.dlt.prove_anchored(sr.operator, t)):
            return None
        return sr
