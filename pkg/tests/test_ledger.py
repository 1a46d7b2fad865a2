import pytest

from support import fig1_signers, fresh_provider, operator_key, oracle_leaf, oracle_node, ZERO
from uso import codec
from uso.anchoring import detect_equivocation
from uso.crypto import hash_bytes, sign
from uso.errors import DuplicateKey, EpochOpen, InvalidSignature, KeyNotFound, KeyPresent, UnknownEpoch
from uso.ledger import (
    EquivocatingProvider,
    IntegrityProvider,
    Registration,
    fetch_or_exclude,
    registration_key,
)
from uso.trie import ProofOfExclusion, ProofOfInclusion, verify_exclusion, verify_inclusion


def registration(kp, payload: bytes = b"F") -> Registration:
    d = hash_bytes(payload)
    return Registration(kp.public, sign(kp, d), d)


@pytest.fixture
def provider():
    return IntegrityProvider("L", operator_key("L"))


class TestSubmission:
    def test_receipt_names_open_epoch(self, provider):
        provider.close_epoch()
        receipt = provider.submit_registration(registration(operator_key("k1")))
        assert (receipt.ledger_id, receipt.epoch) == ("L", 1)

    def test_second_registration_is_duplicate_with_original_epoch(self, provider):
        kp = operator_key("k1")
        provider.submit_registration(registration(kp, b"one"))
        provider.close_epoch()
        provider.close_epoch()
        with pytest.raises(DuplicateKey) as err:
            provider.submit_registration(registration(kp, b"two"))
        assert err.value.context["original_epoch"] == 0

    def test_duplicate_caught_while_pending(self, provider):
        kp = operator_key("k1")
        provider.submit_registration(registration(kp, b"one"))
        with pytest.raises(DuplicateKey):
            provider.submit_registration(registration(kp, b"one"))

    def test_signature_by_another_key_rejected(self, provider):
        kp, other = operator_key("k1"), operator_key("k2")
        d = hash_bytes(b"F")
        with pytest.raises(InvalidSignature):
            provider.submit_registration(Registration(kp.public, sign(other, d), d))

    def test_signature_over_another_digest_rejected(self, provider):
        kp = operator_key("k1")
        with pytest.raises(InvalidSignature):
            provider.submit_registration(Registration(kp.public, sign(kp, hash_bytes(b"a")), hash_bytes(b"b")))

    def test_rejected_registration_leaves_key_free(self, provider):
        kp, other = operator_key("k1"), operator_key("k2")
        d = hash_bytes(b"F")
        with pytest.raises(InvalidSignature):
            provider.submit_registration(Registration(kp.public, sign(other, d), d))
        provider.submit_registration(registration(kp))


class TestEpochs:
    def test_empty_close_repeats_root(self, provider):
        provider.submit_registration(registration(operator_key("k1")))
        a = provider.close_epoch()
        b = provider.close_epoch()
        assert (a.epoch, b.epoch) == (0, 1)
        assert a.root == b.root
        assert b.verify()

    def test_reference_trie_registrations(self, provider):
        signers = fig1_signers()
        regs = [registration(kp, b"fig1-%d" % i) for i, kp in enumerate(signers)]
        for reg in regs:
            provider.submit_registration(reg)
        root = provider.close_epoch()
        C = [oracle_leaf(registration_key(r.key), codec.encode(r.value_sig)) for r in regs]
        expected = oracle_node(oracle_node(oracle_node(ZERO, C[0]), ZERO),
                               oracle_node(oracle_node(ZERO, C[1]), oracle_node(C[2], C[3])))
        assert root.root == expected

    def test_trie_is_cumulative(self, provider):
        kp = operator_key("k1")
        provider.submit_registration(registration(kp))
        provider.close_epoch()
        provider.submit_registration(registration(operator_key("k2")))
        provider.close_epoch()
        provider.close_epoch()
        proof = provider.fetch_proof(kp.public, 2)
        assert verify_inclusion(provider.get_signed_root(2).root, proof)

    def test_root_is_monotone_superset(self, provider):
        keys = [operator_key(f"m{i}") for i in range(4)]
        for i, kp in enumerate(keys):
            provider.submit_registration(registration(kp))
            provider.close_epoch()
            for earlier in keys[: i + 1]:
                assert verify_inclusion(provider.get_signed_root(i).root, provider.fetch_proof(earlier.public, i))

    def test_signed_root_is_stable(self, provider):
        provider.close_epoch()
        assert codec.encode(provider.get_signed_root(0)) == codec.encode(provider.get_signed_root(0))

    def test_unknown_and_open_epochs(self, provider):
        provider.close_epoch()
        with pytest.raises(EpochOpen):
            provider.get_signed_root(1)
        with pytest.raises(UnknownEpoch):
            provider.get_signed_root(5)


class TestProofFetching:
    def test_registered_key_proof(self, provider):
        kp = operator_key("k1")
        provider.submit_registration(registration(kp))
        provider.close_epoch()
        assert verify_inclusion(provider.get_signed_root(0).root, provider.fetch_proof(kp.public, 0))
        assert provider.proof_epoch(kp.public) == 0

    def test_unregistered_key_gets_exclusion(self, provider):
        provider.submit_registration(registration(operator_key("k1")))
        provider.close_epoch()
        absent = operator_key("absent").public
        with pytest.raises(KeyNotFound):
            provider.fetch_proof(absent, 0)
        assert verify_exclusion(provider.get_signed_root(0).root, provider.fetch_exclusion(absent, 0))
        assert isinstance(fetch_or_exclude(provider, absent, 0), ProofOfExclusion)

    def test_registered_key_has_no_exclusion(self, provider):
        kp = operator_key("k1")
        provider.submit_registration(registration(kp))
        provider.close_epoch()
        with pytest.raises(KeyPresent):
            provider.fetch_exclusion(kp.public, 0)
        assert isinstance(fetch_or_exclude(provider, kp.public, 0), ProofOfInclusion)

    def test_pending_key_not_yet_provable(self, provider):
        provider.close_epoch()
        kp = operator_key("k1")
        provider.submit_registration(registration(kp))
        with pytest.raises(EpochOpen):
            provider.fetch_proof(kp.public, 1)
        with pytest.raises(EpochOpen):
            provider.proof_epoch(kp.public)
        with pytest.raises(KeyNotFound):
            provider.fetch_proof(kp.public, 0)

    def test_registered_digest_lookup(self, provider):
        kp = operator_key("k1")
        reg = registration(kp, b"payload")
        provider.submit_registration(reg)
        assert provider.registered_digest(kp.public) == reg.value_digest
        assert provider.registered_digest(operator_key("k2").public) is None


class TestEquivocatingDouble:
    def test_two_views_for_one_epoch(self):
        p = EquivocatingProvider("L", operator_key("L"))
        p.fork_next_close()
        p.close_epoch()
        a, b = p.get_signed_root(0, "A"), p.get_signed_root(0, "B")
        assert a.epoch == b.epoch and a.root != b.root
        assert a.verify() and b.verify()
        assert detect_equivocation([a, b]) is not None

    def test_honest_history_has_no_evidence(self):
        p = fresh_provider("H")
        for _ in range(3):
            p.close_epoch()
        assert detect_equivocation(p.roots()) is None
