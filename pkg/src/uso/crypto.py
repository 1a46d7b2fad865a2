"""Hashing, signatures, Chaumian blinding and signed commitments.

Two signature schemes sit behind one ``sign``/``verify`` interface:

* ``Scheme.STANDARD`` -- Ed25519, used for the one-time asset keys, operator
  keys and account keys;
* ``Scheme.BLIND_CAPABLE`` -- RSA full-domain-hash signatures, used for the
  issuer/minter keys because they commute with multiplicative blinding::

      unblind(blind_sign(sk, blind(d, pk)), r) == sign(sk, d)

Randomness (key generation, blinding factors, nonces) always comes from an
injectable ``random.Random``-like source so simulations replay bytewise.
"""

from __future__ import annotations

import functools
import hashlib
import math
import random
from dataclasses import dataclass, field
from enum import IntEnum

import gmpy2
from cryptography.exceptions import InvalidSignature as _CryptoInvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from . import codec
from .codec import canonical
from .errors import FactorConsumed, MalformedMessage, SchemeMismatch

DIGEST_SIZE = 32
RSA_EXPONENT = 65537
MIN_RSA_BITS = 512
NONCE_SIZE = 32

_system_rng = random.SystemRandom()


class HashTag(IntEnum):
    """One-byte domain separation prefixes."""

    LEAF = 0x00
    NODE = 0x01
    COMMIT = 0x02
    MESSAGE = 0x03
    KEY_PATH = 0x04
    VALUE = 0x05
    FDH = 0x06
    ROOT = 0x07
    ANCHOR = 0x08
    ENDORSE = 0x09


@canonical(0x01)
class Digest(bytes):
    """Exactly 32 bytes; compares bytewise."""

    def __new__(cls, value: bytes = bytes(DIGEST_SIZE)):
        obj = super().__new__(cls, value)
        if len(obj) != DIGEST_SIZE:
            raise ValueError(f"digest must be {DIGEST_SIZE} bytes, got {len(obj)}")
        return obj

    def __repr__(self):
        return f"Digest({self.hex()[:16]}...)"


NULL_DIGEST = Digest(bytes(DIGEST_SIZE))


def hash_bytes(data: bytes) -> Digest:
    """Plain SHA-256."""
    return Digest(hashlib.sha256(data).digest())


def tagged_hash(tag: HashTag, *parts: bytes) -> Digest:
    h = hashlib.sha256(bytes((tag,)))
    for p in parts:
        h.update(p)
    return Digest(h.digest())


def _rng(rng):
    return _system_rng if rng is None else rng


class Scheme(IntEnum):
    STANDARD = 1
    BLIND_CAPABLE = 2


def _int_to_bytes(x: int, length: int | None = None) -> bytes:
    if length is None:
        length = max(1, (x.bit_length() + 7) // 8)
    return x.to_bytes(length, "big")


@canonical(0x02)
@dataclass(frozen=True)
class VerifyingKey:
    scheme: Scheme
    data: bytes

    def __post_init__(self):
        if self.scheme == Scheme.STANDARD:
            if len(self.data) != 32:
                raise ValueError("Ed25519 public keys are 32 bytes")
        elif self.scheme == Scheme.BLIND_CAPABLE:
            if len(self.data) < 5 or self.data[0] == 0:
                raise ValueError("non-canonical RSA modulus encoding")
            n = int.from_bytes(self.data[:-4], "big")
            e = int.from_bytes(self.data[-4:], "big")
            if n.bit_length() < MIN_RSA_BITS or n % 2 == 0 or e < 3 or e % 2 == 0:
                raise ValueError("invalid RSA public key")
        else:
            raise ValueError(f"unknown scheme {self.scheme}")

    @property
    def modulus(self) -> int:
        return int.from_bytes(self.data[:-4], "big")

    @property
    def exponent(self) -> int:
        return int.from_bytes(self.data[-4:], "big")

    @property
    def modulus_bytes(self) -> int:
        return len(self.data) - 4

    def fingerprint(self) -> Digest:
        return hash_bytes(codec.encode(self))

    def __repr__(self):
        return f"VerifyingKey({self.scheme.name}, {self.fingerprint().hex()[:12]})"


@canonical(0x03)
@dataclass(frozen=True, repr=False)
class SigningKeyPair:
    """Private key material plus its public half.

    ``secret`` is the 32-byte Ed25519 seed, or ``len(p) || p || len(q) || q``
    for RSA.
    """

    scheme: Scheme
    secret: bytes
    public: VerifyingKey

    def __post_init__(self):
        if self.public.scheme != self.scheme:
            raise ValueError("public key scheme mismatch")
        if self.scheme == Scheme.STANDARD:
            if self._ed25519_public() != self.public.data:
                raise ValueError("seed does not match public key")
        else:
            p, q = self._rsa_primes()
            if p * q != self.public.modulus:
                raise ValueError("primes do not match modulus")

    def _ed25519_public(self) -> bytes:
        return self._ed25519.public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )

    @functools.cached_property
    def _ed25519(self) -> Ed25519PrivateKey:
        return Ed25519PrivateKey.from_private_bytes(self.secret)

    def _rsa_primes(self) -> tuple[int, int]:
        r = codec.Reader(self.secret)
        p = int.from_bytes(r.var(), "big")
        q = int.from_bytes(r.var(), "big")
        r.done()
        return p, q

    @functools.cached_property
    def _rsa(self) -> tuple[int, ...]:
        p, q = self._rsa_primes()
        e = self.public.exponent
        d = pow(e, -1, math.lcm(p - 1, q - 1))
        return (self.public.modulus, d, p, q, d % (p - 1), d % (q - 1), pow(q, -1, p))

    def _rsa_private_op(self, m: int) -> int:
        n, d, p, q, dp, dq, qinv = self._rsa
        mp = int(gmpy2.powmod(m, dp, p))
        mq = int(gmpy2.powmod(m, dq, q))
        return mq + q * ((qinv * (mp - mq)) % p)

    def __repr__(self):
        return f"SigningKeyPair({self.public!r})"


def _rsa_prime(rng, bits: int) -> int:
    while True:
        cand = rng.getrandbits(bits) | (3 << (bits - 2)) | 1
        p = int(gmpy2.next_prime(cand))
        if p.bit_length() == bits and math.gcd(p - 1, RSA_EXPONENT) == 1:
            return p


def generate_keypair(scheme: Scheme = Scheme.STANDARD, rng=None, bits: int = 2048) -> SigningKeyPair:
    rng = _rng(rng)
    if scheme == Scheme.STANDARD:
        seed = rng.randbytes(32)
        pub = Ed25519PrivateKey.from_private_bytes(seed).public_key().public_bytes(
            serialization.Encoding.Raw, serialization.PublicFormat.Raw
        )
        return SigningKeyPair(scheme, seed, VerifyingKey(scheme, pub))
    if bits < MIN_RSA_BITS:
        raise ValueError(f"RSA modulus must be at least {MIN_RSA_BITS} bits")
    while True:
        p = _rsa_prime(rng, bits // 2)
        q = _rsa_prime(rng, bits - bits // 2)
        n = p * q
        if p != q and n.bit_length() == bits:
            break
    w = codec.Writer()
    w.var(_int_to_bytes(p))
    w.var(_int_to_bytes(q))
    pub = VerifyingKey(scheme, _int_to_bytes(n) + RSA_EXPONENT.to_bytes(4, "big"))
    return SigningKeyPair(scheme, w.getvalue(), pub)


@canonical(0x04)
@dataclass(frozen=True)
class Signature:
    scheme: Scheme
    data: bytes

    def __repr__(self):
        return f"Signature({self.scheme.name}, {self.data[:6].hex()}...)"


def _mgf1(seed: bytes, length: int) -> bytes:
    out = bytearray()
    counter = 0
    while len(out) < length:
        out += hashlib.sha256(seed + counter.to_bytes(4, "big")).digest()
        counter += 1
    return bytes(out[:length])


def _fdh(data: bytes, key: VerifyingKey) -> int:
    k = key.modulus_bytes
    return int.from_bytes(_mgf1(bytes((HashTag.FDH,)) + data, k), "big") % key.modulus


def sign(key: SigningKeyPair, data: bytes) -> Signature:
    if key.scheme == Scheme.STANDARD:
        return Signature(Scheme.STANDARD, key._ed25519.sign(data))
    s = key._rsa_private_op(_fdh(data, key.public))
    return Signature(Scheme.BLIND_CAPABLE, _int_to_bytes(s, key.public.modulus_bytes))


def verify(key: VerifyingKey, data: bytes, sig: Signature) -> bool:
    """Total: malformed inputs give ``False``, never an exception."""
    try:
        if not isinstance(key, VerifyingKey) or not isinstance(sig, Signature):
            return False
        if sig.scheme != key.scheme:
            return False
        data = bytes(data)
        if key.scheme == Scheme.STANDARD:
            if len(sig.data) != 64:
                return False
            Ed25519PublicKey.from_public_bytes(key.data).verify(sig.data, data)
            return True
        if len(sig.data) != key.modulus_bytes:
            return False
        s = int.from_bytes(sig.data, "big")
        n = key.modulus
        if s >= n:
            return False
        return pow(s, key.exponent, n) == _fdh(data, key)
    except (_CryptoInvalidSignature, ValueError, TypeError):
        return False


# -- blinding ----------------------------------------------------------------

@canonical(0x06)
@dataclass(frozen=True)
class BlindedMessage:
    data: bytes


@canonical(0x07)
@dataclass(frozen=True)
class BlindSignature:
    data: bytes


@canonical(0x05)
@dataclass
class BlindingFactor:
    """Secret multiplier ``r``; usable for exactly one unblinding."""

    secret: bytes
    modulus: bytes
    consumed: bool = field(default=False, init=False, compare=False, repr=False)

    def consume(self) -> int:
        if self.consumed:
            raise FactorConsumed("blinding factor already used")
        self.consumed = True
        return int.from_bytes(self.secret, "big")


def _require_blind(key: VerifyingKey):
    if key.scheme != Scheme.BLIND_CAPABLE:
        raise SchemeMismatch(f"{key.scheme.name} key cannot blind")


def blind(digest: bytes, issuer_key: VerifyingKey, rng=None) -> tuple[BlindedMessage, BlindingFactor]:
    _require_blind(issuer_key)
    rng = _rng(rng)
    n = issuer_key.modulus
    k = issuer_key.modulus_bytes
    while True:
        r = rng.getrandbits(n.bit_length()) % n
        if r > 1 and math.gcd(r, n) == 1:
            break
    m = _fdh(bytes(digest), issuer_key)
    blinded = (m * pow(r, issuer_key.exponent, n)) % n
    factor = BlindingFactor(_int_to_bytes(r, k), _int_to_bytes(n, k))
    return BlindedMessage(_int_to_bytes(blinded, k)), factor


def blind_sign(issuer: SigningKeyPair, msg: BlindedMessage) -> BlindSignature:
    _require_blind(issuer.public)
    n = issuer.public.modulus
    k = issuer.public.modulus_bytes
    if len(msg.data) != k:
        raise MalformedMessage("blinded message has wrong width")
    m = int.from_bytes(msg.data, "big")
    if m == 0 or m >= n or math.gcd(m, n) != 1:
        raise MalformedMessage("blinded message is not a unit mod n")
    return BlindSignature(_int_to_bytes(issuer._rsa_private_op(m), k))


def unblind(sig: BlindSignature, factor: BlindingFactor) -> Signature:
    r = factor.consume()
    n = int.from_bytes(factor.modulus, "big")
    s = (int.from_bytes(sig.data, "big") * pow(r, -1, n)) % n
    return Signature(Scheme.BLIND_CAPABLE, _int_to_bytes(s, len(factor.modulus)))


# -- commitments ---------------------------------------------------------------

@canonical(0x08)
@dataclass(frozen=True)
class SignedCommitment:
    commitment: Digest
    signer: VerifyingKey
    sig: Signature


@canonical(0x09)
@dataclass(frozen=True)
class LinkageProof:
    """Explicit opening of a commitment: reveals the committed vector."""

    opened_vector: object
    nonce: bytes
    commitment_ref: SignedCommitment


def commitment_digest(vector, nonce: bytes) -> Digest:
    return tagged_hash(HashTag.COMMIT, codec.encode(vector), nonce)


def commit(vector, committer: SigningKeyPair, rng=None) -> tuple[SignedCommitment, bytes]:
    nonce = _rng(rng).randbytes(NONCE_SIZE)
    c = commitment_digest(vector, nonce)
    return SignedCommitment(c, committer.public, sign(committer, c)), nonce


def prove_linkage(vector, nonce: bytes, commitment: SignedCommitment) -> LinkageProof:
    return LinkageProof(vector, nonce, commitment)


def verify_linkage(proof: LinkageProof) -> bool:
    try:
        ref = proof.commitment_ref
        if len(proof.nonce) != NONCE_SIZE:
            return False
        if commitment_digest(proof.opened_vector, proof.nonce) != ref.commitment:
            return False
        return verify(ref.signer, ref.commitment, ref.sig)
    except (TypeError, ValueError, AttributeError):
        return False
