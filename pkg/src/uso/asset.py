"""Unforgeable, stateful, oblivious assets.

An asset is a genesis vector ``F_0`` with an issuer authority, followed by
a chain of signed update vectors.  Each vector names the one-time key that
must sign the next update, and each update is registered (key and signature
only) with the integrity provider named by the previous vector.  The
accumulated inclusion proofs form the proof of provenance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable

from . import codec
from .codec import canonical
from .crypto import (
    Digest,
    HashTag,
    Scheme,
    Signature,
    SigningKeyPair,
    VerifyingKey,
    generate_keypair,
    sign,
    tagged_hash,
    verify,
)
from .errors import InvalidGenesisSig, WrongKey, WrongProvider
from .ledger import (
    IntegrityProvider,
    Registration,
    RegistrationReceipt,
    SignedRoot,
    registration_key,
    registration_value_digest,
)
from .trie import ProofOfInclusion, verify_inclusion


class UpdateKind:
    """Well-known values for the opaque ``u`` field."""

    MINT = b"MINT"
    TRANSFER = b"TRANSFER"
    REDEEM = b"REDEEM"
    BURN_COMMIT = b"BURN-COMMIT"
    ROTATE = b"ROTATE"


@canonical(0x30)
@dataclass(frozen=True)
class LedgerRef:
    """Names root ``epoch`` of ledger ``ledger_id``."""

    ledger_id: str
    epoch: int


@canonical(0x31)
@dataclass(frozen=True)
class UpdateVector:
    u: bytes
    ledger_ref: LedgerRef | None
    next_key: VerifyingKey

    def digest(self) -> Digest:
        return tagged_hash(HashTag.MESSAGE, codec.encode(self))


@canonical(0x32)
@dataclass(frozen=True)
class Update:
    vector: UpdateVector
    sig: Signature


@canonical(0x33)
@dataclass(frozen=True)
class DirectGenesis:
    """Issuer signature over ``h(F_0)``; blind-issued signatures look identical."""

    issuer: VerifyingKey
    sig: Signature

    def check(self, vector: UpdateVector, policy: IssuerPolicy) -> list[tuple[str, str]]:
        problems = []
        if not verify(self.issuer, vector.digest(), self.sig):
            problems.append(("INVALID_GENESIS_SIG", "issuer signature does not verify"))
        if self.issuer not in policy.issuer_keys:
            problems.append(("UNKNOWN_ISSUER", "issuer key not recognised by policy"))
        return problems

    def self_check(self, vector: UpdateVector) -> bool:
        return verify(self.issuer, vector.digest(), self.sig)


@canonical(0x34)
@dataclass(frozen=True)
class Genesis:
    vector: UpdateVector
    authority: object


@canonical(0x35)
@dataclass(frozen=True)
class Asset:
    genesis: Genesis
    updates: tuple[Update, ...] = ()

    @property
    def vectors(self) -> list[UpdateVector]:
        return [self.genesis.vector] + [u.vector for u in self.updates]

    @property
    def current_key(self) -> VerifyingKey:
        return self.vectors[-1].next_key

    @property
    def asset_id(self) -> Digest:
        return self.genesis.vector.digest()

    def signing_key_for(self, j: int) -> VerifyingKey:
        """``k_j``: the key that signs update ``j`` (1-based)."""
        return self.vectors[j - 1].next_key

    def provider_for(self, j: int) -> LedgerRef:
        """Ledger named by ``F_{j-1}``, inheriting through empty refs."""
        vectors = self.vectors
        for i in range(j - 1, -1, -1):
            if vectors[i].ledger_ref is not None:
                return vectors[i].ledger_ref
        raise ValueError("genesis vector has no ledger reference")

    def registration_for(self, j: int) -> Registration:
        upd = self.updates[j - 1]
        return Registration(self.signing_key_for(j), upd.sig, upd.vector.digest())

    def append(self, update: Update) -> Asset:
        return Asset(self.genesis, self.updates + (update,))


@canonical(0x36)
@dataclass(frozen=True)
class ProvenanceEntry:
    proof: ProofOfInclusion
    root: SignedRoot


@canonical(0x37)
@dataclass(frozen=True)
class ProofOfProvenance:
    entries: tuple[ProvenanceEntry, ...] = ()

    def __len__(self):
        return len(self.entries)

    def extend(self, entry: ProvenanceEntry) -> ProofOfProvenance:
        return ProofOfProvenance(self.entries + (entry,))


RootResolver = Callable[[str, int], "SignedRoot | None"]


@canonical(0x39)
@dataclass(frozen=True)
class TrustBundle:
    """Issuer keys and roots a verifier accepts, as a portable file."""

    issuer_keys: tuple[VerifyingKey, ...]
    roots: tuple[SignedRoot, ...]

    def policy(self) -> IssuerPolicy:
        table = {(r.ledger_id, r.epoch): r for r in self.roots}
        return IssuerPolicy(frozenset(self.issuer_keys), lambda lid, e: table.get((lid, e)))


@dataclass
class IssuerPolicy:
    issuer_keys: frozenset
    resolver: RootResolver

    def __post_init__(self):
        self.issuer_keys = frozenset(self.issuer_keys)
        if not self.issuer_keys:
            raise ValueError("policy needs at least one issuer key")


# -- lifecycle -----------------------------------------------------------------

def sign_genesis(vector: UpdateVector, issuer: SigningKeyPair) -> DirectGenesis:
    return DirectGenesis(issuer.public, sign(issuer, vector.digest()))


def create_genesis(u0: bytes, ledger_ref: LedgerRef, next_key: VerifyingKey, authority) -> Asset:
    """Build ``A_0``; ``authority`` is a DirectGenesis or a burn certificate."""
    if ledger_ref is None:
        raise ValueError("the genesis vector must name a ledger root")
    vector = UpdateVector(u0, ledger_ref, next_key)
    if not authority.self_check(vector):
        raise InvalidGenesisSig("genesis authority does not cover this vector")
    return Asset(Genesis(vector, authority))


def make_update(
    asset: Asset,
    u: bytes,
    ledger_ref: LedgerRef | None,
    next_key: VerifyingKey,
    current_private_key: SigningKeyPair,
) -> tuple[Asset, Update]:
    if current_private_key.public != asset.current_key:
        raise WrongKey("signing key is not the asset's current key")
    vector = UpdateVector(u, ledger_ref, next_key)
    update = Update(vector, sign(current_private_key, vector.digest()))
    return asset.append(update), update


@dataclass
class PendingRegistration:
    asset: Asset
    index: int
    registration: Registration
    receipt: RegistrationReceipt

    def collect(self, provider: IntegrityProvider, epoch: int | None = None) -> ProvenanceEntry:
        """Fetch the inclusion proof once the receipt's epoch has closed."""
        if epoch is None:
            epoch = provider.open_epoch - 1
        proof = provider.fetch_proof(self.registration.key, epoch)
        return ProvenanceEntry(proof, provider.get_signed_root(epoch))


def register_update(asset: Asset, provider: IntegrityProvider, index: int | None = None) -> PendingRegistration:
    j = len(asset.updates) if index is None else index
    expected = asset.provider_for(j)
    if provider.ledger_id != expected.ledger_id:
        raise WrongProvider(f"update {j} must be registered with {expected.ledger_id}")
    reg = asset.registration_for(j)
    receipt = provider.submit_registration(reg)
    return PendingRegistration(asset, j, reg, receipt)


# -- verification --------------------------------------------------------------

@dataclass(frozen=True)
class Check:
    name: str
    ok: bool
    code: str | None = None
    detail: str = ""


@dataclass
class VerificationReport:
    checks: list[Check] = field(default_factory=list)
    updates: int = 0
    registered: int = 0

    def add(self, name, ok, code=None, detail=""):
        self.checks.append(Check(name, ok, None if ok else code, "" if ok else detail))

    @property
    def ok(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> list[Check]:
        return [c for c in self.checks if not c.ok]

    @property
    def codes(self) -> set[str]:
        return {c.code for c in self.failures}

    @property
    def chain_ok(self) -> bool:
        """Everything verifies apart from trailing updates not yet registered."""
        return all(c.code == "MISSING_REGISTRATION" for c in self.failures)

    def summary(self) -> str:
        if self.ok:
            return f"OK ({self.updates} updates, {self.registered} registered)"
        return "; ".join(f"{c.name}: {c.code} {c.detail}".strip() for c in self.failures)


def _same_root(a: SignedRoot, b: SignedRoot) -> bool:
    return (a.ledger_id, a.epoch, a.root, a.operator) == (b.ledger_id, b.epoch, b.root, b.operator)


def verify_provenance(asset: Asset, provenance: ProofOfProvenance, policy: IssuerPolicy) -> VerificationReport:
    report = VerificationReport(updates=len(asset.updates))
    try:
        _verify_into(report, asset, provenance, policy)
    except (TypeError, ValueError, AttributeError) as exc:
        report.add("structure", False, "MALFORMED", str(exc))
    return report


def _verify_into(report, asset, provenance, policy):
    f0 = asset.genesis.vector
    ref = f0.ledger_ref
    if ref is None:
        report.add("genesis.ledger_ref", False, "MISSING_LEDGER_REF", "F_0 must name a ledger root")
    else:
        report.add("genesis.ledger_ref", policy.resolver(ref.ledger_id, ref.epoch) is not None,
                   "UNRESOLVED_GENESIS_REF", f"{ref.ledger_id}@{ref.epoch}")
    authority = asset.genesis.authority
    if not hasattr(authority, "check"):
        report.add("genesis", False, "INVALID_GENESIS_SIG", "unknown authority type")
    else:
        problems = authority.check(f0, policy)
        if not problems:
            report.add("genesis", True)
        for code, detail in problems:
            report.add("genesis", False, code, detail)

    keys = [v.next_key for v in asset.vectors]
    report.add("keys.fresh", len(set(keys)) == len(keys), "KEY_REUSE", "one-time key appears twice")

    for j, upd in enumerate(asset.updates, 1):
        ok = verify(asset.signing_key_for(j), upd.vector.digest(), upd.sig)
        report.add(f"chain[{j}]", ok, "BROKEN_CHAIN", "update signature does not verify under k_j")

    entries = provenance.entries
    report.add("provenance.length", len(entries) <= len(asset.updates), "EXTRA_PROOF",
               f"{len(entries)} proofs for {len(asset.updates)} updates")
    for j, upd in enumerate(asset.updates, 1):
        name = f"registration[{j}]"
        if j > len(entries):
            report.add(name, False, "MISSING_REGISTRATION", "no inclusion proof for this update")
            continue
        entry = entries[j - 1]
        proof, root = entry.proof, entry.root
        binds = (proof.key == registration_key(asset.signing_key_for(j))
                 and proof.value_digest == registration_value_digest(upd.sig))
        report.add(name + ".binding", binds, "INVALID_PROOF", "proof is for a different key or signature")
        expected = asset.provider_for(j)
        report.add(name + ".continuity",
                   root.ledger_id == expected.ledger_id and root.epoch >= expected.epoch,
                   "WRONG_PROVIDER", f"registered at {root.ledger_id}@{root.epoch}, expected {expected.ledger_id}")
        report.add(name + ".root_sig", root.verify(), "INVALID_ROOT_SIG", "operator signature on root fails")
        trusted = policy.resolver(root.ledger_id, root.epoch)
        if trusted is None:
            report.add(name + ".root", False, "UNRESOLVED_ROOT", f"{root.ledger_id}@{root.epoch} not resolvable")
        else:
            report.add(name + ".root", _same_root(trusted, root), "ROOT_MISMATCH",
                       "root differs from the trusted root for that epoch")
        included = verify_inclusion(root.root, proof)
        report.add(name + ".inclusion", included, "INVALID_PROOF", "inclusion proof does not reach the root")
        if binds and included:
            report.registered += 1


# -- transfer ------------------------------------------------------------------

class TransferMode(IntEnum):
    SENDER_REGISTERS = 1
    RECIPIENT_REGISTERS = 2


@canonical(0x38)
@dataclass(frozen=True)
class TransferBundle:
    """What the sender hands over: ``(F_j, P_j)`` or ``(F_j, P_{j-1}, k_j, s)``."""

    asset: Asset
    provenance: ProofOfProvenance
    registration: Registration | None = None


@dataclass
class Transfer:
    mode: TransferMode
    asset: Asset
    prior: ProofOfProvenance
    pending: PendingRegistration | None = None
    provenance: ProofOfProvenance | None = None

    def complete(self, provider: IntegrityProvider, epoch: int | None = None) -> ProofOfProvenance:
        """Collect the proof after the registration's epoch closed."""
        if self.pending is None:
            raise ValueError("transfer has not been registered")
        self.provenance = self.prior.extend(self.pending.collect(provider, epoch))
        return self.provenance

    def bundle(self) -> TransferBundle:
        if self.mode == TransferMode.SENDER_REGISTERS:
            if self.provenance is None:
                raise ValueError("sender-registered bundle needs the new proof first")
            return TransferBundle(self.asset, self.provenance)
        return TransferBundle(self.asset, self.prior, self.asset.registration_for(len(self.asset.updates)))


def transfer(
    asset: Asset,
    provenance: ProofOfProvenance,
    sender_key: SigningKeyPair,
    recipient_key: VerifyingKey,
    mode: TransferMode,
    provider: IntegrityProvider | None = None,
    u: bytes = UpdateKind.TRANSFER,
    ledger_ref: LedgerRef | None = None,
) -> Transfer:
    new_asset, _ = make_update(asset, u, ledger_ref, recipient_key, sender_key)
    t = Transfer(mode, new_asset, provenance)
    if mode == TransferMode.SENDER_REGISTERS:
        if provider is None:
            raise ValueError("sender-registered transfer needs the provider")
        t.pending = register_update(new_asset, provider)
    return t


def check_incoming(bundle: TransferBundle, recipient_key: VerifyingKey, policy: IssuerPolicy) -> VerificationReport:
    """Recipient-side check before registering or accepting a bundle."""
    report = verify_provenance(bundle.asset, bundle.provenance, policy)
    report.add("recipient", bundle.asset.current_key == recipient_key, "WRONG_KEY",
               "asset is not addressed to this recipient")
    if bundle.registration is not None:
        j = len(bundle.asset.updates)
        report.add("registration.matches", j > 0 and bundle.registration == bundle.asset.registration_for(j),
                   "INVALID_REGISTRATION", "registration does not match the last update")
    return report


def register_transfer(bundle: TransferBundle, provider: IntegrityProvider) -> PendingRegistration:
    """Recipient registers the update it was handed."""
    return register_update(bundle.asset, provider)


def has_control(asset: Asset, provider: IntegrityProvider) -> bool:
    """The latest update is registered with the provider under its own digest."""
    j = len(asset.updates)
    if j == 0:
        return True
    upd = asset.updates[-1]
    return provider.registered_digest(asset.signing_key_for(j)) == upd.vector.digest()


# -- wallet --------------------------------------------------------------------

@dataclass
class Holding:
    asset: Asset
    provenance: ProofOfProvenance = field(default_factory=ProofOfProvenance)


class Wallet:
    """Single-owner key store and asset set."""

    def __init__(self, rng=None):
        self.rng = rng
        self._keys: dict[VerifyingKey, SigningKeyPair] = {}
        self.retired: set[VerifyingKey] = set()
        self.holdings: dict[str, Holding] = {}

    def new_key(self, scheme: Scheme = Scheme.STANDARD) -> VerifyingKey:
        kp = generate_keypair(scheme, rng=self.rng)
        self._keys[kp.public] = kp
        return kp.public

    def key(self, public: VerifyingKey) -> SigningKeyPair:
        if public in self.retired or public not in self._keys:
            raise WrongKey("no usable private key for this public key")
        return self._keys[public]

    def owns(self, public: VerifyingKey) -> bool:
        return public in self._keys

    def retire(self, public: VerifyingKey):
        self.retired.add(public)

    def update(self, asset: Asset, u: bytes, ledger_ref: LedgerRef | None, next_key: VerifyingKey):
        key = self.key(asset.current_key)
        out = make_update(asset, u, ledger_ref, next_key, key)
        self.retire(key.public)
        return out
