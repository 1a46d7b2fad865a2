"""Issuer-side actors: bank, minter and bulletin board.

Two withdrawal flows produce a genesis authority for a new token ``F_0``:

* Chaum-style: the consumer blinds ``h(F_0)``, the bank relays it with a
  debit voucher to the minter, and the consumer unblinds the result.  The
  bank and minter never see ``h(F_0)``.
* Commitment-style: the consumer sends a signed commitment ``beta(F_0)``;
  the bank posts ``(voucher, beta)`` to a bulletin board and hands back the
  board's inclusion proof.  The token later carries an explicit opening of
  the commitment.

Tokens are redeemed by a final REDEEM update addressed to the bank's sink
key, registered like any other update.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from enum import IntEnum

from . import codec
from .asset import (
    Asset,
    DirectGenesis,
    IssuerPolicy,
    LedgerRef,
    ProofOfProvenance,
    ProvenanceEntry,
    UpdateKind,
    UpdateVector,
    create_genesis,
    register_update,
    verify_provenance,
)
from .codec import canonical
from .crypto import (
    BlindedMessage,
    BlindSignature,
    Digest,
    HashTag,
    LinkageProof,
    Scheme,
    Signature,
    SignedCommitment,
    SigningKeyPair,
    VerifyingKey,
    blind,
    blind_sign,
    commit,
    generate_keypair,
    prove_linkage,
    sign,
    tagged_hash,
    unblind,
    verify,
    verify_linkage,
)
from .errors import (
    AuthRefused,
    DenominationUnsupported,
    DoubleRedeem,
    DuplicateKey,
    InvalidProvenance,
    SchemeMismatch,
)
from .ledger import IntegrityProvider, Registration, SignedRoot, registration_key, registration_value_digest
from .trie import ProofOfInclusion, verify_inclusion

DENOMINATIONS = (1, 5, 10, 50)
SERIAL_SIZE = 16


def mint_message(q: int) -> bytes:
    """``u_0`` for a token of ``q`` units."""
    return UpdateKind.MINT + b":" + str(q).encode()


def parse_mint_message(u: bytes) -> int | None:
    prefix = UpdateKind.MINT + b":"
    if not u.startswith(prefix):
        return None
    try:
        return int(u[len(prefix):])
    except ValueError:
        return None


def _body_digest(body) -> Digest:
    return tagged_hash(HashTag.MESSAGE, codec.encode(body))


# -- messages ------------------------------------------------------------------

@canonical(0x40)
@dataclass(frozen=True)
class AuthorisationBody:
    account: str
    amount: int
    serial: bytes
    bank: VerifyingKey


@canonical(0x41)
@dataclass(frozen=True)
class WithdrawalAuthorisation:
    """``w``: the bank's signed permission to withdraw ``q`` units once."""

    body: AuthorisationBody
    sig: Signature

    @property
    def amount(self) -> int:
        return self.body.amount

    def verify(self) -> bool:
        return verify(self.body.bank, _body_digest(self.body), self.sig)


@canonical(0x42)
@dataclass(frozen=True)
class BlindInitRequest:
    """``B``: client hello naming the denomination."""

    denomination: int
    session: bytes


@canonical(0x43)
@dataclass(frozen=True)
class BlindInitResponse:
    """``B'``: the minter's blind-capable key for that denomination."""

    denomination: int
    key: VerifyingKey
    session: bytes


class VoucherKind(IntEnum):
    DEBIT = 1
    TOKENS = 2


@canonical(0x44)
@dataclass(frozen=True)
class VoucherBody:
    kind: VoucherKind
    amount: int
    serial: bytes
    token_ids: tuple[Digest, ...]
    bank: VerifyingKey


@canonical(0x45)
@dataclass(frozen=True)
class Voucher:
    """``F~``: a debit of ``q`` units or a bundle of redeemed tokens."""

    body: VoucherBody
    sig: Signature

    @property
    def amount(self) -> int:
        return self.body.amount

    @property
    def serial(self) -> bytes:
        return self.body.serial

    def verify(self) -> bool:
        return verify(self.body.bank, _body_digest(self.body), self.sig)


@canonical(0x46)
@dataclass(frozen=True)
class WithdrawRequest:
    """Blind withdrawal message (5): ``w, b(h(F_0))``."""

    authorisation: WithdrawalAuthorisation
    blinded: BlindedMessage


@canonical(0x47)
@dataclass(frozen=True)
class MintRequest:
    """Blind withdrawal message (6): ``F~, b(h(F_0))``."""

    voucher: Voucher
    blinded: BlindedMessage


@canonical(0x48)
@dataclass(frozen=True)
class CommitRequest:
    """Commitment withdrawal message (3): ``w, beta(F_0)``."""

    authorisation: WithdrawalAuthorisation
    commitment: SignedCommitment


def entry_digest(voucher: Voucher, commitment: SignedCommitment, board_key: VerifyingKey) -> Digest:
    return tagged_hash(HashTag.ENDORSE, codec.encode(voucher), codec.encode(commitment), codec.encode(board_key))


@canonical(0x49)
@dataclass(frozen=True)
class BulletinEntry:
    """The pair ``(F~, beta(F_0))`` as posted under board key ``k_b``."""

    voucher: Voucher
    commitment: SignedCommitment
    board_key: VerifyingKey
    endorsement: Signature

    def digest(self) -> Digest:
        return entry_digest(self.voucher, self.commitment, self.board_key)

    def endorsed(self) -> bool:
        return verify(self.voucher.body.bank, self.digest(), self.endorsement)


@canonical(0x4A)
@dataclass(frozen=True)
class BoardPost:
    """Commitment withdrawal message (4), from bank to board."""

    entry: BulletinEntry
    registration: Registration


@canonical(0x4B)
@dataclass(frozen=True)
class BoardReceipt:
    """Commitment withdrawal messages (5) and (6): ``p(G_BB,t, k_b, (F~, beta(F_0)))``."""

    entry: BulletinEntry
    entry_sig: Signature
    proof: ProofOfInclusion
    root: SignedRoot

    def verify(self) -> bool:
        e = self.entry
        return (
            e.endorsed()
            and verify(e.board_key, e.digest(), self.entry_sig)
            and self.proof.key == registration_key(e.board_key)
            and self.proof.value_digest == registration_value_digest(self.entry_sig)
            and self.root.verify()
            and verify_inclusion(self.root.root, self.proof)
        )


@canonical(0x4C)
@dataclass(frozen=True)
class BurnGenesis:
    """Genesis authority for a commitment-path token.

    Carries the opening of ``beta(F_0)`` plus the board receipt showing the
    committed pair was posted by the bank.
    """

    linkage: LinkageProof
    receipt: BoardReceipt

    def self_check(self, vector: UpdateVector) -> bool:
        return (
            self.linkage.opened_vector == vector
            and verify_linkage(self.linkage)
            and self.linkage.commitment_ref == self.receipt.entry.commitment
        )

    def check(self, vector: UpdateVector, policy: IssuerPolicy) -> list[tuple[str, str]]:
        problems = []
        if not self.self_check(vector):
            problems.append(("INVALID_LINKAGE", "commitment does not open to this vector"))
        r = self.receipt
        if not r.verify():
            problems.append(("INVALID_BOARD_PROOF", "board entry is not proven under the board root"))
        if r.entry.voucher.body.bank not in policy.issuer_keys:
            problems.append(("UNKNOWN_ISSUER", "voucher not issued by a recognised bank"))
        elif not r.entry.voucher.verify():
            problems.append(("INVALID_GENESIS_SIG", "voucher signature does not verify"))
        if parse_mint_message(vector.u) != r.entry.voucher.amount:
            problems.append(("AMOUNT_MISMATCH", "u_0 does not match the voucher amount"))
        trusted = policy.resolver(r.root.ledger_id, r.root.epoch)
        if trusted is None or trusted.root != r.root.root:
            problems.append(("UNRESOLVED_BOARD_ROOT", "board root not resolvable by policy"))
        return problems


@canonical(0x4D)
@dataclass(frozen=True)
class RedemptionRequest:
    account: str
    asset: Asset
    provenance: ProofOfProvenance


@canonical(0x4E)
@dataclass(frozen=True)
class Credit:
    account: str
    amount: int
    token_id: Digest
    balance: int


# -- actors --------------------------------------------------------------------

@dataclass
class ViewLog:
    """Every byte string an actor received, in order."""

    entries: list[tuple[str, bytes]] = field(default_factory=list)

    def record(self, label: str, obj):
        self.entries.append((label, codec.encode(obj)))

    def contains(self, needle: bytes) -> bool:
        return any(needle in blob for _, blob in self.entries)


class Minter:
    """Holds one blind-capable key per denomination."""

    def __init__(self, bank_key: VerifyingKey, rng=None, denominations=DENOMINATIONS, bits: int = 2048):
        self.bank_key = bank_key
        self.keys = {q: generate_keypair(Scheme.BLIND_CAPABLE, rng=rng, bits=bits) for q in denominations}
        self.used_serials: set[bytes] = set()
        self.view = ViewLog()

    @property
    def public_keys(self) -> dict[int, VerifyingKey]:
        return {q: kp.public for q, kp in self.keys.items()}

    def denomination_of(self, key: VerifyingKey) -> int | None:
        for q, kp in self.keys.items():
            if kp.public == key:
                return q
        return None

    def init_blind(self, req: BlindInitRequest) -> BlindInitResponse:
        self.view.record("B", req)
        if req.denomination not in self.keys:
            raise DenominationUnsupported(f"no key for {req.denomination} units")
        return BlindInitResponse(req.denomination, self.keys[req.denomination].public, req.session)

    def mint(self, req: MintRequest) -> BlindSignature:
        self.view.record("F~,b(h(F0))", req)
        v = req.voucher
        if v.body.bank != self.bank_key or not v.verify():
            raise AuthRefused("voucher not signed by the bank")
        if v.serial in self.used_serials:
            raise AuthRefused("voucher already used")
        if v.amount not in self.keys:
            raise DenominationUnsupported(f"no key for {v.amount} units")
        self.used_serials.add(v.serial)
        return blind_sign(self.keys[v.amount], req.blinded)


class BulletinBoard(IntegrityProvider):
    """Public integrity provider that accepts bank-endorsed entries.

    Each post closes an epoch so the receipt is available immediately.
    """

    def __init__(self, ledger_id: str, operator: SigningKeyPair, bank_keys=()):
        super().__init__(ledger_id, operator)
        self.bank_keys = set(bank_keys)
        self.entries: dict[bytes, BulletinEntry] = {}

    def post(self, post: BoardPost) -> BoardReceipt:
        entry, reg = post.entry, post.registration
        if entry.voucher.body.bank not in self.bank_keys or not entry.endorsed():
            raise AuthRefused("entry not endorsed by a recognised bank")
        if reg.key != entry.board_key or reg.value_digest != entry.digest():
            raise AuthRefused("registration does not match the entry")
        self.submit_registration(reg)
        signed = self.close_epoch()
        self.entries[registration_key(entry.board_key)] = entry
        proof = self.fetch_proof(entry.board_key, signed.epoch)
        return BoardReceipt(entry, reg.value_sig, proof, signed)

    def lookup(self, board_key: VerifyingKey) -> BulletinEntry | None:
        return self.entries.get(registration_key(board_key))


class Bank:
    """Accounts, withdrawal authorisations, vouchers and redemption."""

    def __init__(self, name: str, rng=None):
        self.name = name
        self.rng = rng
        self.key = generate_keypair(rng=rng)
        self.sink = generate_keypair(rng=rng)
        self.balances: dict[str, int] = {}
        self.used_authorisations: set[bytes] = set()
        self.redeemed: set[bytes] = set()
        self.credits: list[Credit] = []
        self.view = ViewLog()
        self.minter_keys: dict[VerifyingKey, int] = {}

    @property
    def public(self) -> VerifyingKey:
        return self.key.public

    def open_account(self, account: str, balance: int):
        self.balances[account] = self.balances.get(account, 0) + balance

    def recognise_minter(self, minter_keys: dict[int, VerifyingKey]):
        self.minter_keys.update({k: q for q, k in minter_keys.items()})

    def _serial(self) -> bytes:
        return self.rng.randbytes(SERIAL_SIZE) if self.rng else os.urandom(SERIAL_SIZE)

    def authorise(self, account: str, q: int) -> WithdrawalAuthorisation:
        """Issue ``w``; this is the prologue before the withdrawal messages."""
        if q not in DENOMINATIONS:
            raise DenominationUnsupported(f"{q} is not a supported denomination")
        if self.balances.get(account, 0) < q:
            raise AuthRefused(f"account {account!r} cannot cover {q}")
        body = AuthorisationBody(account, q, self._serial(), self.public)
        return WithdrawalAuthorisation(body, sign(self.key, _body_digest(body)))

    def _consume_authorisation(self, w: WithdrawalAuthorisation):
        if w.body.amount not in DENOMINATIONS:
            raise DenominationUnsupported(f"{w.body.amount} is not a supported denomination")
        if w.body.bank != self.public or not w.verify():
            raise AuthRefused("authorisation not signed by this bank")
        if w.body.serial in self.used_authorisations:
            raise AuthRefused("authorisation already used")
        if self.balances.get(w.body.account, 0) < w.amount:
            raise AuthRefused("insufficient balance")
        self.used_authorisations.add(w.body.serial)
        self.balances[w.body.account] -= w.amount

    def issue_voucher(self, amount: int, kind=VoucherKind.DEBIT, token_ids=()) -> Voucher:
        body = VoucherBody(kind, amount, self._serial(), tuple(token_ids), self.public)
        return Voucher(body, sign(self.key, _body_digest(body)))

    def relay_init(self, req: BlindInitRequest) -> BlindInitRequest:
        """Blind withdrawal (1)->(2): forwarded unchanged."""
        self.view.record("B", req)
        return req

    def relay_init_response(self, resp: BlindInitResponse) -> BlindInitResponse:
        self.view.record("B'", resp)
        return resp

    def withdraw(self, req: WithdrawRequest) -> MintRequest:
        """Blind withdrawal (5)->(6): check ``w``, debit, wrap the blinded digest."""
        self.view.record("w,b(h(F0))", req)
        self._consume_authorisation(req.authorisation)
        return MintRequest(self.issue_voucher(req.authorisation.amount), req.blinded)

    def relay_signature(self, sig: BlindSignature) -> BlindSignature:
        self.view.record("s(b(h(F0)))", sig)
        return sig

    def post_commitment(self, req: CommitRequest) -> BoardPost:
        """Commitment withdrawal (3)->(4): check ``w`` and endorse ``(F~, beta)`` under a fresh ``k_b``."""
        self.view.record("w,beta(F0)", req)
        if not verify(req.commitment.signer, req.commitment.commitment, req.commitment.sig):
            raise AuthRefused("commitment signature does not verify")
        self._consume_authorisation(req.authorisation)
        voucher = self.issue_voucher(req.authorisation.amount)
        kb = generate_keypair(rng=self.rng)
        d = entry_digest(voucher, req.commitment, kb.public)
        entry = BulletinEntry(voucher, req.commitment, kb.public, sign(self.key, d))
        return BoardPost(entry, Registration(kb.public, sign(kb, d), d))

    def relay_receipt(self, receipt: BoardReceipt) -> BoardReceipt:
        self.view.record("p(G_BB)", receipt)
        return receipt

    def redemption_value(self, asset: Asset) -> int | None:
        auth = asset.genesis.authority
        if isinstance(auth, DirectGenesis):
            return self.minter_keys.get(auth.issuer)
        if isinstance(auth, BurnGenesis):
            return auth.receipt.entry.voucher.amount
        return None

    def redeem(self, req: RedemptionRequest, policy: IssuerPolicy, recycle: bool = False):
        """Credit the account (or, with ``recycle``, return a TOKENS voucher)."""
        asset = req.asset
        token_id = bytes(asset.asset_id)
        if token_id in self.redeemed:
            raise DoubleRedeem("token already redeemed")
        report = verify_provenance(asset, req.provenance, policy)
        if not report.ok:
            raise InvalidProvenance(report.summary(), report=report)
        last = asset.vectors[-1]
        if not asset.updates or last.u != UpdateKind.REDEEM or last.next_key != self.sink.public:
            raise InvalidProvenance("last update is not a REDEEM addressed to this bank")
        value = self.redemption_value(asset)
        if value is None:
            raise InvalidProvenance("token value unknown to this bank")
        self.redeemed.add(token_id)
        if recycle:
            return self.issue_voucher(value, VoucherKind.TOKENS, (asset.asset_id,))
        self.balances[req.account] = self.balances.get(req.account, 0) + value
        credit = Credit(req.account, value, asset.asset_id, self.balances[req.account])
        self.credits.append(credit)
        return credit


# -- synchronous flows ---------------------------------------------------------

@dataclass(frozen=True)
class FlowMessage:
    step: int
    src: str
    dst: str
    label: str
    body: object


@dataclass
class WithdrawalResult:
    asset: Asset
    key: SigningKeyPair
    transcript: list[FlowMessage]
    nonce: bytes | None = None


def chaum_withdraw(
    wallet,
    bank: Bank,
    minter: Minter,
    authorisation: WithdrawalAuthorisation,
    ledger_ref: LedgerRef,
    rng=None,
) -> WithdrawalResult:
    """Blind-signature withdrawal end to end; returns the new token and the eight messages."""
    q = authorisation.amount
    if q not in DENOMINATIONS:
        raise DenominationUnsupported(f"{q} is not a supported denomination")
    t: list[FlowMessage] = []
    session = (rng.randbytes(16) if rng else bytes(16))
    req = BlindInitRequest(q, session)
    t.append(FlowMessage(1, "consumer", "bank", "B", req))
    t.append(FlowMessage(2, "bank", "minter", "B", bank.relay_init(req)))
    resp = minter.init_blind(req)
    t.append(FlowMessage(3, "minter", "bank", "B'", resp))
    t.append(FlowMessage(4, "bank", "consumer", "B'", bank.relay_init_response(resp)))
    if resp.key.scheme != Scheme.BLIND_CAPABLE or resp.denomination != q:
        raise SchemeMismatch("minter response does not match the requested denomination")

    k1 = wallet.new_key()
    f0 = UpdateVector(mint_message(q), ledger_ref, k1)
    blinded, factor = blind(f0.digest(), resp.key, rng)
    wreq = WithdrawRequest(authorisation, blinded)
    t.append(FlowMessage(5, "consumer", "bank", "w,b(h(F0))", wreq))
    mreq = bank.withdraw(wreq)
    t.append(FlowMessage(6, "bank", "minter", "F~,b(h(F0))", mreq))
    bsig = minter.mint(mreq)
    t.append(FlowMessage(7, "minter", "bank", "s(b(h(F0)))", bsig))
    t.append(FlowMessage(8, "bank", "consumer", "s(b(h(F0)))", bank.relay_signature(bsig)))
    sig = unblind(bsig, factor)
    asset = create_genesis(f0.u, ledger_ref, k1, DirectGenesis(resp.key, sig))
    return WithdrawalResult(asset, wallet.key(k1), t)


def zkp_withdraw(
    wallet,
    bank: Bank,
    board: BulletinBoard,
    authorisation: WithdrawalAuthorisation,
    ledger_ref: LedgerRef,
    rng=None,
) -> WithdrawalResult:
    """Commitment withdrawal, messages (3)-(6); the token's authority is a :class:`BurnGenesis`."""
    q = authorisation.amount
    t: list[FlowMessage] = []
    k1 = wallet.new_key()
    f0 = UpdateVector(mint_message(q), ledger_ref, k1)
    committer = generate_keypair(rng=rng)
    beta, nonce = commit(f0, committer, rng)
    creq = CommitRequest(authorisation, beta)
    t.append(FlowMessage(3, "consumer", "bank", "w,beta(F0)", creq))
    post = bank.post_commitment(creq)
    t.append(FlowMessage(4, "bank", "bulletin_board", "F~,beta(F0)", post))
    receipt = board.post(post)
    t.append(FlowMessage(5, "bulletin_board", "bank", "p(G_BB,t,k_b,(F~,beta(F0)))", receipt))
    t.append(FlowMessage(6, "bank", "consumer", "p(G_BB,t,k_b,(F~,beta(F0)))", bank.relay_receipt(receipt)))
    if not receipt.verify() or receipt.entry.commitment != beta:
        raise AuthRefused("bulletin board receipt does not verify")
    authority = BurnGenesis(prove_linkage(f0, nonce, beta), receipt)
    asset = create_genesis(f0.u, ledger_ref, k1, authority)
    return WithdrawalResult(asset, wallet.key(k1), t, nonce)


def prepare_redemption(wallet, asset: Asset, provenance: ProofOfProvenance, bank: Bank,
                       provider: IntegrityProvider) -> tuple[Asset, ProofOfProvenance]:
    """Append and register the final REDEEM update, then collect its proof."""
    redeemed, _ = wallet.update(asset, UpdateKind.REDEEM, None, bank.sink.public)
    try:
        pending = register_update(redeemed, provider)
    except DuplicateKey as exc:
        raise DoubleRedeem("token key already consumed", original_epoch=exc.original_epoch) from exc
    provider.close_epoch()
    return redeemed, provenance.extend(pending.collect(provider))


def redeem(bank: Bank, account: str, asset: Asset, provenance: ProofOfProvenance,
           policy: IssuerPolicy, recycle: bool = False):
    return bank.redeem(RedemptionRequest(account, asset, provenance), policy, recycle)


def provenance_entry(provider: IntegrityProvider, key: VerifyingKey, epoch: int) -> ProvenanceEntry:
    return ProvenanceEntry(provider.fetch_proof(key, epoch), provider.get_signed_root(epoch))
