"""Integrity provider: an oblivious ledger of one-time-key registrations.

The provider only ever sees ``(k_j, s(h(F_j), k_j), h(F_j))`` and keeps a
cumulative trie mapping ``encode(k_j)`` to ``encode(signature)``.  Each
``close_epoch`` publishes a signed root; because the trie is cumulative, a
key registered in epoch ``i`` can be proven against every later root.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import codec
from .codec import canonical
from .crypto import (
    Digest,
    HashTag,
    Signature,
    SigningKeyPair,
    VerifyingKey,
    sign,
    tagged_hash,
    verify,
)
from .errors import DuplicateKey, EpochOpen, InvalidSignature, KeyNotFound, UnknownEpoch
from .trie import ProofOfExclusion, ProofOfInclusion, RootDigest, Trie, value_digest


@canonical(0x20)
@dataclass(frozen=True)
class Registration:
    key: VerifyingKey
    value_sig: Signature
    value_digest: Digest

    def is_valid(self) -> bool:
        return verify(self.key, self.value_digest, self.value_sig)

    @property
    def trie_key(self) -> bytes:
        return registration_key(self.key)

    @property
    def trie_value(self) -> bytes:
        return codec.encode(self.value_sig)


def registration_key(key: VerifyingKey) -> bytes:
    return codec.encode(key)


def registration_value_digest(sig: Signature) -> Digest:
    """Value digest a proof binds for a registration carrying ``sig``."""
    return value_digest(codec.encode(sig))


def root_message(ledger_id: str, epoch: int, root: Digest) -> Digest:
    w = codec.Writer()
    w.var(ledger_id.encode("utf-8"))
    w.u64(epoch)
    w.raw(root)
    return tagged_hash(HashTag.ROOT, w.getvalue())


@canonical(0x21)
@dataclass(frozen=True)
class SignedRoot:
    ledger_id: str
    epoch: int
    root: Digest
    operator: VerifyingKey
    sig: Signature

    def verify(self) -> bool:
        return verify(self.operator, root_message(self.ledger_id, self.epoch, self.root), self.sig)

    @property
    def root_digest(self) -> RootDigest:
        return RootDigest(self.root)


def sign_root(operator: SigningKeyPair, ledger_id: str, epoch: int, root: Digest) -> SignedRoot:
    sig = sign(operator, root_message(ledger_id, epoch, root))
    return SignedRoot(ledger_id, epoch, Digest(root), operator.public, sig)


@canonical(0x22)
@dataclass(frozen=True)
class RegistrationReceipt:
    ledger_id: str
    epoch: int
    key: VerifyingKey


class IntegrityProvider:
    """Notarisation service with explicit, clock-driven epoch closes."""

    def __init__(self, ledger_id: str, operator: SigningKeyPair):
        self.ledger_id = ledger_id
        self.operator = operator
        self._trie = Trie()
        self._pending: list[Registration] = []
        self._consumed: dict[bytes, int] = {}
        self._values: dict[bytes, Digest] = {}
        self._epochs: list[tuple[Trie, SignedRoot]] = []

    @property
    def operator_key(self) -> VerifyingKey:
        return self.operator.public

    @property
    def open_epoch(self) -> int:
        return len(self._epochs)

    @property
    def latest_root(self) -> SignedRoot | None:
        return self._epochs[-1][1] if self._epochs else None

    def submit_registration(self, reg: Registration) -> RegistrationReceipt:
        tk = reg.trie_key
        if tk in self._consumed:
            raise DuplicateKey(
                f"key already registered in epoch {self._consumed[tk]}",
                original_epoch=self._consumed[tk],
            )
        if not reg.is_valid():
            raise InvalidSignature("value signature does not verify under the key")
        self._consumed[tk] = self.open_epoch
        self._values[tk] = reg.value_digest
        self._pending.append(reg)
        return RegistrationReceipt(self.ledger_id, self.open_epoch, reg.key)

    def close_epoch(self) -> SignedRoot:
        trie = self._trie
        for reg in self._pending:
            trie = trie.insert(reg.trie_key, reg.trie_value)
        self._trie = trie
        self._pending = []
        signed = sign_root(self.operator, self.ledger_id, self.open_epoch, trie.root().digest)
        self._epochs.append((trie, signed))
        return signed

    def _closed(self, epoch_index: int) -> Trie:
        if epoch_index == self.open_epoch:
            raise EpochOpen(f"epoch {epoch_index} is still open")
        if not 0 <= epoch_index < self.open_epoch:
            raise UnknownEpoch(f"no epoch {epoch_index}")
        return self._epochs[epoch_index][0]

    def fetch_proof(self, key: VerifyingKey, epoch_index: int) -> ProofOfInclusion:
        return self._closed(epoch_index).prove_inclusion(registration_key(key))

    def fetch_exclusion(self, key: VerifyingKey, epoch_index: int) -> ProofOfExclusion:
        return self._closed(epoch_index).prove_exclusion(registration_key(key))

    def get_signed_root(self, epoch_index: int) -> SignedRoot:
        self._closed(epoch_index)
        return self._epochs[epoch_index][1]

    def roots(self) -> list[SignedRoot]:
        return [signed for _, signed in self._epochs]

    def registration_epoch(self, key: VerifyingKey) -> int | None:
        """Epoch a key was accepted into, or None if never registered."""
        return self._consumed.get(registration_key(key))

    def registered_digest(self, key: VerifyingKey) -> Digest | None:
        """The ``h(F_j)`` accepted under ``key``, pending or closed."""
        return self._values.get(registration_key(key))

    def proof_epoch(self, key: VerifyingKey) -> int:
        """First closed epoch whose root includes ``key``."""
        e = self.registration_epoch(key)
        if e is None:
            raise KeyNotFound("key never registered")
        if e >= self.open_epoch:
            raise EpochOpen("registration still pending")
        return e


class EquivocatingProvider(IntegrityProvider):
    """Test double that can sign two different roots for one epoch.

    After :meth:`fork_next_close`, the next close produces the honest root
    (view ``"A"``) and an alternate root over the same trie plus phantom
    registrations (view ``"B"``).
    """

    def __init__(self, ledger_id: str, operator: SigningKeyPair):
        super().__init__(ledger_id, operator)
        self._fork_phantoms: list[bytes] | None = None
        self.forks: dict[int, SignedRoot] = {}

    def fork_next_close(self, phantom_keys: list[bytes] | None = None):
        self._fork_phantoms = list(phantom_keys or [b"phantom"])

    def close_epoch(self) -> SignedRoot:
        honest = super().close_epoch()
        if self._fork_phantoms is not None:
            alt = self._trie
            for pk in self._fork_phantoms:
                if pk not in alt:
                    alt = alt.insert(pk, b"phantom-value")
            self.forks[honest.epoch] = sign_root(self.operator, self.ledger_id, honest.epoch, alt.root().digest)
            self._fork_phantoms = None
        return honest

    def get_signed_root(self, epoch_index: int, view: str = "A") -> SignedRoot:
        honest = super().get_signed_root(epoch_index)
        if view == "B" and epoch_index in self.forks:
            return self.forks[epoch_index]
        return honest


def fetch_or_exclude(provider: IntegrityProvider, key: VerifyingKey, epoch_index: int):
    """Inclusion proof if the key is in that epoch's root, otherwise exclusion."""
    try:
        return provider.fetch_proof(key, epoch_index)
    except KeyNotFound:
        return provider.fetch_exclusion(key, epoch_index)

