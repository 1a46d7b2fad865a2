"""Builders and oracles shared by the test modules."""

from __future__ import annotations

import dataclasses
import hashlib
import random
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache

from uso.anchoring import DirectResolver
from uso.asset import (
    Asset,
    IssuerPolicy,
    LedgerRef,
    ProofOfProvenance,
    UpdateKind,
    UpdateVector,
    Wallet,
    create_genesis,
    register_update,
    sign_genesis,
)
from uso.crypto import Scheme, SigningKeyPair, generate_keypair
from uso.ledger import IntegrityProvider
from uso.trie import key_path

ZERO = bytes(32)


def rng(label) -> random.Random:
    return random.Random(f"tests:{label}")


@lru_cache(maxsize=None)
def issuer_key(bits: int = 1024) -> SigningKeyPair:
    return generate_keypair(Scheme.BLIND_CAPABLE, rng(f"issuer:{bits}"), bits)


@lru_cache(maxsize=None)
def operator_key(name: str = "L") -> SigningKeyPair:
    return generate_keypair(Scheme.STANDARD, rng(f"operator:{name}"))


def bits_of(path: bytes, n: int) -> str:
    return format(int.from_bytes(path, "big"), "0256b")[:n]


def prefix_of(key: bytes, n: int) -> str:
    return bits_of(key_path(key), n)


# -- independent hashing, straight from hashlib ----------------------------------

def h(tag: int, *parts: bytes) -> bytes:
    m = hashlib.sha256(bytes([tag]))
    for p in parts:
        m.update(p)
    return m.digest()


def oracle_leaf(key: bytes, value: bytes) -> bytes:
    path = h(0x04, key)
    return h(0x00, path, h(0x05, value))


def oracle_node(left: bytes, right: bytes) -> bytes:
    if left == ZERO and right == ZERO:
        return ZERO
    return h(0x01, left, right)


def oracle_root(entries: dict[bytes, bytes], width: int = 8) -> bytes:
    """Materialise every slot of a full tree and hash it bottom-up.

    The leaf depth is the smallest depth (up to ``width``) at which all the
    stored path prefixes differ.
    """
    if not entries:
        return ZERO
    paths = {k: bits_of(h(0x04, k), width) for k in entries}
    depth = next(d for d in range(width + 1) if len({p[:d] for p in paths.values()}) == len(paths))
    level = [ZERO] * (1 << depth)
    for k, v in entries.items():
        slot = int(paths[k][:depth], 2) if depth else 0
        level[slot] = oracle_leaf(k, v)
    while len(level) > 1:
        level = [oracle_node(level[i], level[i + 1]) for i in range(0, len(level), 2)]
    return level[0]


# -- four-leaf reference trie ---------------------------------------------------------------

FIG1_PREFIXES = ("001", "101", "110", "111")


@lru_cache(maxsize=None)
def fig1_keys() -> tuple[bytes, ...]:
    """Four byte-string keys whose paths start 001, 101, 110, 111."""
    found: dict[str, bytes] = {}
    i = 0
    while len(found) < 4:
        k = b"fig1-key-%d" % i
        p = prefix_of(k, 3)
        if p in FIG1_PREFIXES and p not in found:
            found[p] = k
        i += 1
    return tuple(found[p] for p in FIG1_PREFIXES)


@lru_cache(maxsize=None)
def fig1_signers() -> tuple[SigningKeyPair, ...]:
    """Four one-time keys whose registration paths start 001, 101, 110, 111."""
    from uso.ledger import registration_key

    found: dict[str, SigningKeyPair] = {}
    r = rng("fig1-signers")
    while len(found) < 4:
        kp = generate_keypair(Scheme.STANDARD, r)
        p = prefix_of(registration_key(kp.public), 3)
        if p in FIG1_PREFIXES and p not in found:
            found[p] = kp
    return tuple(found[p] for p in FIG1_PREFIXES)


# -- a registered asset --------------------------------------------------------------

@dataclass
class BuiltAsset:
    asset: Asset
    provenance: ProofOfProvenance
    policy: IssuerPolicy
    provider: IntegrityProvider
    wallet: Wallet
    issuer: SigningKeyPair


def provider_policy(issuer_keys, *providers) -> IssuerPolicy:
    return IssuerPolicy(set(issuer_keys), DirectResolver(providers))


def fresh_provider(ledger_id: str = "L") -> IntegrityProvider:
    provider = IntegrityProvider(ledger_id, operator_key(ledger_id))
    provider.close_epoch()
    return provider


def build_asset(updates: int = 3, label: str = "asset", provider=None, u0: bytes = b"MINT:5") -> BuiltAsset:
    """Issue an asset and register ``updates`` rotations, one epoch each.

    The second update names a fresh ledger root explicitly so both the
    ``None`` and the explicit form of the ledger reference are exercised.
    """
    issuer = issuer_key()
    provider = provider or fresh_provider()
    wallet = Wallet(rng(label))
    k1 = wallet.new_key()
    ref = LedgerRef(provider.ledger_id, provider.open_epoch - 1)
    f0 = UpdateVector(u0, ref, k1)
    asset = create_genesis(u0, ref, k1, sign_genesis(f0, issuer))
    provenance = ProofOfProvenance()
    for j in range(1, updates + 1):
        nref = LedgerRef(provider.ledger_id, provider.open_epoch - 1) if j == 2 else None
        asset, _ = wallet.update(asset, UpdateKind.ROTATE, nref, wallet.new_key())
        pending = register_update(asset, provider)
        provider.close_epoch()
        provenance = provenance.extend(pending.collect(provider))
    return BuiltAsset(asset, provenance, provider_policy([issuer.public], provider), provider, wallet, issuer)


# -- single-field mutation ------------------------------------------------------------

class Unconstructible:
    """Marker for a mutant the type constructors themselves reject."""

    def __init__(self, reason: str):
        self.reason = reason


def _flip_positions(n: int, every_byte: bool) -> list[int]:
    if every_byte:
        return list(range(n))
    return sorted({0, n // 2, n - 1}) if n else []


def _leaf_mutants(v, every_byte):
    if isinstance(v, bool):
        yield "not", not v
    elif isinstance(v, IntEnum):
        for other in type(v):
            if other != v:
                yield f"={other.name}", other
    elif isinstance(v, int):
        yield "+1", v + 1
    elif isinstance(v, str):
        yield "+x", v + "x"
    elif isinstance(v, bytes):
        for i in _flip_positions(len(v), every_byte):
            b = bytearray(v)
            b[i] ^= 0x01
            yield f"[{i}]^1", type(v)(bytes(b))
        if not v:
            yield "+00", type(v)(b"\x00")


def mutants(obj, path: str = "", every_byte: bool = False):
    """Yield ``(path, mutant)`` for every single-field mutation of ``obj``.

    Bytes fields get one bit flipped at their first, middle and last byte,
    or at every byte when ``every_byte`` is set; numbers
    are incremented, strings extended, enums swapped and optional ledger
    references toggled between ``None`` and a value.
    """
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        for f in dataclasses.fields(obj):
            if not f.init:
                continue
            v = getattr(obj, f.name)
            sub = f"{path}.{f.name}" if path else f.name
            options = list(mutants(v, sub, every_byte))
            if f.name == "ledger_ref":
                options.append((sub + "=toggle", LedgerRef("L", 0) if v is None else None))
            for p, mv in options:
                if isinstance(mv, Unconstructible):
                    yield p, mv
                    continue
                try:
                    yield p, dataclasses.replace(obj, **{f.name: mv})
                except (ValueError, TypeError) as exc:
                    yield p, Unconstructible(str(exc))
    elif isinstance(obj, tuple):
        for i, v in enumerate(obj):
            for p, mv in mutants(v, f"{path}[{i}]", every_byte):
                if isinstance(mv, Unconstructible):
                    yield p, mv
                else:
                    yield p, obj[:i] + (mv,) + obj[i + 1:]
    elif obj is not None:
        for p, mv in _leaf_mutants(obj, every_byte):
            yield path + p, mv
