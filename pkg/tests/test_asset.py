import dataclasses

import pytest

from support import (
    Unconstructible,
    build_asset,
    fresh_provider,
    issuer_key,
    mutants,
    operator_key,
    provider_policy,
    rng,
)
from uso import codec
from uso.asset import (
    Asset,
    DirectGenesis,
    IssuerPolicy,
    LedgerRef,
    ProofOfProvenance,
    TransferBundle,
    TransferMode,
    UpdateKind,
    UpdateVector,
    Wallet,
    check_incoming,
    create_genesis,
    has_control,
    make_update,
    register_transfer,
    register_update,
    sign_genesis,
    transfer,
    verify_provenance,
)
from uso.errors import DuplicateKey, InvalidGenesisSig, WrongKey, WrongProvider
from uso.ledger import sign_root


def genesis(wallet: Wallet, provider, u0=b"MINT:5") -> Asset:
    k1 = wallet.new_key()
    ref = LedgerRef(provider.ledger_id, provider.open_epoch - 1)
    vec = UpdateVector(u0, ref, k1)
    return create_genesis(u0, ref, k1, sign_genesis(vec, issuer_key()))


class TestGenesis:
    def test_direct_issuance_verifies(self):
        provider = fresh_provider()
        asset = genesis(Wallet(rng("g")), provider)
        report = verify_provenance(asset, ProofOfProvenance(), provider_policy([issuer_key().public], provider))
        assert report.ok, report.summary()
        assert asset.updates == ()

    def test_authority_must_cover_vector(self):
        provider = fresh_provider()
        w = Wallet(rng("g"))
        k1 = w.new_key()
        ref = LedgerRef("L", 0)
        auth = sign_genesis(UpdateVector(b"MINT:5", ref, k1), issuer_key())
        with pytest.raises(InvalidGenesisSig):
            create_genesis(b"MINT:50", ref, k1, auth)
        assert provider

    def test_ledger_ref_required(self):
        with pytest.raises(ValueError):
            create_genesis(b"", None, operator_key("k").public, None)

    def test_every_genesis_field_tamper_is_caught(self):
        built = build_asset(updates=0, label="g-tamper")
        vector = built.asset.genesis.vector
        caught = 0
        for path, bad in mutants(vector):
            if isinstance(bad, Unconstructible):
                continue
            asset = Asset(dataclasses.replace(built.asset.genesis, vector=bad))
            report = verify_provenance(asset, built.provenance, built.policy)
            assert not report.ok, path
            assert report.codes & {"INVALID_GENESIS_SIG", "MISSING_LEDGER_REF"}, path
            caught += 1
        assert caught >= 8

    def test_unknown_issuer(self):
        built = build_asset(updates=1, label="g-issuer")
        policy = IssuerPolicy({operator_key("stranger").public}, built.policy.resolver)
        assert "UNKNOWN_ISSUER" in verify_provenance(built.asset, built.provenance, policy).codes

    def test_unresolvable_genesis_root(self):
        built = build_asset(updates=0, label="g-ref")
        f0 = dataclasses.replace(built.asset.genesis.vector, ledger_ref=LedgerRef("L", 99))
        asset = Asset(dataclasses.replace(built.asset.genesis, vector=f0,
                                          authority=sign_genesis(f0, issuer_key())))
        assert verify_provenance(asset, built.provenance, built.policy).codes == {"UNRESOLVED_GENESIS_REF"}


class TestUpdates:
    def test_self_update_extends_chain(self):
        built = build_asset(updates=1, label="u-self")
        w = built.wallet
        nk = w.new_key()
        asset, _ = w.update(built.asset, UpdateKind.ROTATE, None, nk)
        assert len(asset.updates) == 2 and asset.current_key == nk
        report = verify_provenance(asset, built.provenance, built.policy)
        assert report.chain_ok and report.codes == {"MISSING_REGISTRATION"}

    def test_transfer_hands_key_to_recipient(self):
        built = build_asset(updates=0, label="u-transfer")
        recipient = Wallet(rng("recipient"))
        rk = recipient.new_key()
        asset, _ = built.wallet.update(built.asset, UpdateKind.TRANSFER, None, rk)
        assert asset.current_key == rk and recipient.owns(rk)

    def test_stale_key_refused(self):
        built = build_asset(updates=1, label="u-stale")
        stale = built.wallet._keys[built.asset.signing_key_for(1)]
        with pytest.raises(WrongKey):
            make_update(built.asset, b"x", None, operator_key("n").public, stale)
        with pytest.raises(WrongKey):
            built.wallet.key(built.asset.signing_key_for(1))

    def test_wallet_retires_used_keys(self):
        built = build_asset(updates=0, label="u-retire")
        k1 = built.asset.current_key
        built.wallet.update(built.asset, UpdateKind.ROTATE, None, built.wallet.new_key())
        with pytest.raises(WrongKey):
            built.wallet.update(built.asset, UpdateKind.ROTATE, None, built.wallet.new_key())
        assert k1 in built.wallet.retired

    def test_registration_grows_provenance_by_one(self):
        built = build_asset(updates=2, label="u-grow")
        asset, _ = built.wallet.update(built.asset, UpdateKind.ROTATE, None, built.wallet.new_key())
        pending = register_update(asset, built.provider)
        built.provider.close_epoch()
        prov = built.provenance.extend(pending.collect(built.provider))
        assert len(prov) == len(built.provenance) + 1
        assert verify_provenance(asset, prov, built.policy).ok

    def test_conflicting_updates_one_winner(self):
        built = build_asset(updates=0, label="u-double")
        key = built.wallet._keys[built.asset.current_key]
        a, _ = make_update(built.asset, UpdateKind.TRANSFER, None, operator_key("bob").public, key)
        b, _ = make_update(built.asset, UpdateKind.TRANSFER, None, operator_key("carol").public, key)
        register_update(a, built.provider)
        with pytest.raises(DuplicateKey):
            register_update(b, built.provider)
        built.provider.close_epoch()
        assert has_control(a, built.provider) and not has_control(b, built.provider)

    def test_wrong_provider(self):
        built = build_asset(updates=0, label="u-provider")
        asset, _ = built.wallet.update(built.asset, UpdateKind.ROTATE, None, built.wallet.new_key())
        with pytest.raises(WrongProvider):
            register_update(asset, fresh_provider("M"))

    def test_move_to_another_ledger(self):
        built = build_asset(updates=0, label="u-move")
        other = fresh_provider("M")
        w = built.wallet
        moved, _ = w.update(built.asset, UpdateKind.ROTATE, LedgerRef("M", 0), w.new_key())
        p1 = register_update(moved, built.provider)
        built.provider.close_epoch()
        prov = built.provenance.extend(p1.collect(built.provider))
        nxt, _ = w.update(moved, UpdateKind.ROTATE, None, w.new_key())
        p2 = register_update(nxt, other)
        other.close_epoch()
        prov = prov.extend(p2.collect(other))
        policy = provider_policy([issuer_key().public], built.provider, other)
        assert verify_provenance(nxt, prov, policy).ok


@pytest.fixture(scope="module")
def built():
    return build_asset(updates=3, label="v")


class TestVerification:
    def test_three_updates_pass(self, built):
        report = verify_provenance(built.asset, built.provenance, built.policy)
        assert report.ok and report.registered == 3 and report.summary().startswith("OK")

    def test_truncated_provenance_flags_last_update(self, built):
        prov = ProofOfProvenance(built.provenance.entries[:-1])
        report = verify_provenance(built.asset, prov, built.policy)
        assert [c.name for c in report.failures] == ["registration[3]"]
        assert report.codes == {"MISSING_REGISTRATION"} and report.chain_ok

    def test_extra_proof(self, built):
        prov = built.provenance.extend(built.provenance.entries[0])
        assert "EXTRA_PROOF" in verify_provenance(built.asset, prov, built.policy).codes

    def test_rogue_root_unresolved(self, built):
        rogue = operator_key("rogue")
        entry = built.provenance.entries[0]
        forged = sign_root(rogue, "L", 40, entry.root.root)
        prov = ProofOfProvenance((dataclasses.replace(entry, root=forged),) + built.provenance.entries[1:])
        assert "UNRESOLVED_ROOT" in verify_provenance(built.asset, prov, built.policy).codes

    def test_rogue_root_for_known_epoch_mismatches(self, built):
        entry = built.provenance.entries[0]
        forged = sign_root(operator_key("rogue"), "L", entry.root.epoch, entry.root.root)
        prov = ProofOfProvenance((dataclasses.replace(entry, root=forged),) + built.provenance.entries[1:])
        assert "ROOT_MISMATCH" in verify_provenance(built.asset, prov, built.policy).codes

    def test_swapped_proofs(self, built):
        e = built.provenance.entries
        prov = ProofOfProvenance((e[1], e[0], e[2]))
        assert "INVALID_PROOF" in verify_provenance(built.asset, prov, built.policy).codes

    def test_key_reuse(self, built):
        last = built.asset.updates[-1]
        again = dataclasses.replace(last.vector, next_key=built.asset.signing_key_for(1))
        asset = Asset(built.asset.genesis, built.asset.updates[:-1] + (dataclasses.replace(last, vector=again),))
        assert "KEY_REUSE" in verify_provenance(asset, built.provenance, built.policy).codes

    def test_malformed_authority(self, built):
        asset = Asset(dataclasses.replace(built.asset.genesis, authority=operator_key("x").public),
                      built.asset.updates)
        assert "INVALID_GENESIS_SIG" in verify_provenance(asset, built.provenance, built.policy).codes

    def test_files_round_trip(self, built):
        asset = codec.load_file(codec.dump_file(built.asset), Asset)
        prov = codec.load_file(codec.dump_file(built.provenance), ProofOfProvenance)
        assert verify_provenance(asset, prov, built.policy).ok


class TestTransfer:
    def setup_method(self):
        self.built = build_asset(updates=1, label="t")
        self.recipient = Wallet(rng("t-recipient"))
        self.rk = self.recipient.new_key()
        self.sender_key = self.built.wallet.key(self.built.asset.current_key)

    def test_sender_registered(self):
        b = self.built
        t = transfer(b.asset, b.provenance, self.sender_key, self.rk, TransferMode.SENDER_REGISTERS, b.provider)
        with pytest.raises(ValueError):
            t.bundle()
        b.provider.close_epoch()
        t.complete(b.provider)
        bundle = t.bundle()
        assert bundle.registration is None
        assert check_incoming(bundle, self.rk, b.policy).ok

    def test_recipient_registered_control_before_possession(self):
        b = self.built
        t = transfer(b.asset, b.provenance, self.sender_key, self.rk, TransferMode.RECIPIENT_REGISTERS)
        bundle = t.bundle()
        assert len(bundle.provenance) == len(bundle.asset.updates) - 1
        pending = register_transfer(bundle, b.provider)
        assert has_control(bundle.asset, b.provider)
        report = verify_provenance(bundle.asset, bundle.provenance, b.policy)
        assert not report.ok and report.chain_ok
        b.provider.close_epoch()
        prov = bundle.provenance.extend(pending.collect(b.provider))
        assert verify_provenance(bundle.asset, prov, b.policy).ok
        assert has_control(bundle.asset, b.provider)

    def test_recipient_rejects_foreign_asset(self):
        b = self.built
        t = transfer(b.asset, b.provenance, self.sender_key, operator_key("else").public,
                     TransferMode.RECIPIENT_REGISTERS)
        assert "WRONG_KEY" in check_incoming(t.bundle(), self.rk, b.policy).codes

    def test_recipient_rejects_mismatched_registration(self):
        b = self.built
        t = transfer(b.asset, b.provenance, self.sender_key, self.rk, TransferMode.RECIPIENT_REGISTERS)
        good = t.bundle()
        bad_reg = b.asset.registration_for(1)
        bundle = TransferBundle(good.asset, good.provenance, bad_reg)
        assert "INVALID_REGISTRATION" in check_incoming(bundle, self.rk, b.policy).codes

    def test_sender_mode_needs_provider(self):
        b = self.built
        with pytest.raises(ValueError):
            transfer(b.asset, b.provenance, self.sender_key, self.rk, TransferMode.SENDER_REGISTERS)

    def test_sender_cannot_reuse_key_for_second_recipient(self):
        b = self.built
        transfer(b.asset, b.provenance, self.sender_key, self.rk, TransferMode.SENDER_REGISTERS, b.provider)
        with pytest.raises(DuplicateKey):
            transfer(b.asset, b.provenance, self.sender_key, operator_key("other").public,
                     TransferMode.SENDER_REGISTERS, b.provider)

    def test_genesis_alone_is_controlled(self):
        asset = genesis(Wallet(rng("c")), fresh_provider())
        assert has_control(asset, fresh_provider())


def test_direct_genesis_check_reports_both_problems():
    f0 = UpdateVector(b"MINT:5", LedgerRef("L", 0), operator_key("k").public)
    auth = DirectGenesis(operator_key("stranger").public, sign_genesis(f0, issuer_key()).sig)
    policy = IssuerPolicy({issuer_key().public}, lambda *_: None)
    assert {code for code, _ in auth.check(f0, policy)} == {"INVALID_GENESIS_SIG", "UNKNOWN_ISSUER"}
