"""Sparse binary Merkle trie with inclusion and exclusion proofs.

Logical keys are hashed to 256-bit paths.  All leaves sit at one common
depth ``D``: the smallest depth at which every stored path prefix is
distinct (``D = 0`` for a trie with at most one entry).  Above the leaves the
tree is a plain binary Merkle tree in which empty subtrees hash to
``NULL_DIGEST`` and a node with two empty children is itself empty::

    leaf  = H(0x00 || path || H(0x05 || value))
    node  = H(0x01 || left || right)           (NULL if both are NULL)

With four keys whose paths start ``001``, ``101``, ``110`` and ``111`` the
trie is exactly::

    G    = h(C0 | C1)
    C0   = h(C00 | 0)        C1  = h(C10 | C11)
    C00  = h(0 | C001)       C10 = h(0 | C101)     C11 = h(C110 | C111)

Internally the structure is a persistent crit-bit tree, so ``insert``
returns a new trie that shares every untouched subtree with the old one.
Proofs list only the non-empty siblings, each tagged with its depth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

from .codec import canonical
from .crypto import NULL_DIGEST, Digest, HashTag, tagged_hash
from .errors import DuplicateKey, KeyNotFound, KeyPresent, PathCollision

PATH_BITS = 256


def key_path(key: bytes) -> Digest:
    return tagged_hash(HashTag.KEY_PATH, key)


def value_digest(value: bytes) -> Digest:
    return tagged_hash(HashTag.VALUE, value)


def leaf_digest(path: bytes, vdigest: bytes) -> Digest:
    return tagged_hash(HashTag.LEAF, path, vdigest)


def node_digest(left: bytes, right: bytes) -> Digest:
    if left == NULL_DIGEST and right == NULL_DIGEST:
        return NULL_DIGEST
    return tagged_hash(HashTag.NODE, left, right)


def _bit(path: int, i: int) -> int:
    return (path >> (PATH_BITS - 1 - i)) & 1


def _first_diff(a: int, b: int) -> int:
    """Index of the first differing bit (PATH_BITS if equal)."""
    return PATH_BITS - (a ^ b).bit_length()


# -- proofs --------------------------------------------------------------------

@canonical(0x10)
@dataclass(frozen=True)
class Sibling:
    depth: int
    digest: Digest


@canonical(0x11)
@dataclass(frozen=True)
class ProofOfInclusion:
    """Authentication path for one (key, value digest) pair.

    ``siblings`` runs from the leaf towards the root; empty siblings are
    omitted, so each entry records the depth of the sibling node.
    """

    key: bytes
    value_digest: Digest
    leaf_depth: int
    siblings: tuple[Sibling, ...]


class ExclusionKind(IntEnum):
    EMPTY_SUBTREE = 1
    CONFLICTING_LEAF = 2


@canonical(0x12)
@dataclass(frozen=True)
class ProofOfExclusion:
    key: bytes
    kind: ExclusionKind
    depth: int
    siblings: tuple[Sibling, ...]
    conflict: ProofOfInclusion | None = None


@canonical(0x13)
@dataclass(frozen=True)
class RootDigest:
    digest: Digest


def _fold(start: Digest, path: int, depth: int, siblings) -> Digest | None:
    if not 0 <= depth <= PATH_BITS:
        return None
    by_depth = {}
    prev = depth + 1
    for s in siblings:
        # strictly leaf-to-root, inside the path, never the empty constant
        if not 1 <= s.depth < prev or s.digest == NULL_DIGEST or len(s.digest) != 32:
            return None
        by_depth[s.depth] = s.digest
        prev = s.depth
    x = start
    for t in range(depth, 0, -1):
        sib = by_depth.get(t, NULL_DIGEST)
        x = node_digest(sib, x) if _bit(path, t - 1) else node_digest(x, sib)
    return x


def proof_root(proof: ProofOfInclusion) -> Digest | None:
    """Root implied by an inclusion proof, or None if it is ill-formed."""
    path = key_path(proof.key)
    start = leaf_digest(path, proof.value_digest)
    return _fold(start, int.from_bytes(path, "big"), proof.leaf_depth, proof.siblings)


def _as_digest(root) -> bytes:
    return root.digest if isinstance(root, RootDigest) else root


def verify_inclusion(root, proof: ProofOfInclusion) -> bool:
    try:
        got = proof_root(proof)
    except (TypeError, ValueError, AttributeError):
        return False
    return got is not None and got == _as_digest(root)


def verify_exclusion(root, proof: ProofOfExclusion) -> bool:
    try:
        root = _as_digest(root)
        path = int.from_bytes(key_path(proof.key), "big")
        if proof.kind == ExclusionKind.EMPTY_SUBTREE:
            if proof.conflict is not None:
                return False
            return _fold(NULL_DIGEST, path, proof.depth, proof.siblings) == root
        c = proof.conflict
        if c is None or proof.siblings or c.key == proof.key or proof.depth != c.leaf_depth:
            return False
        other = int.from_bytes(key_path(c.key), "big")
        # the conflicting leaf occupies the slot the absent key would need
        if other == path or _first_diff(other, path) < c.leaf_depth:
            return False
        return verify_inclusion(root, c)
    except (TypeError, ValueError, AttributeError):
        return False


# -- persistent crit-bit structure ----------------------------------------------

@dataclass(frozen=True, eq=False)
class _Leaf:
    path: int
    path_digest: Digest
    key: bytes
    value_digest: Digest
    digest: Digest


@dataclass(frozen=True, eq=False)
class _Branch:
    bit: int
    left: object
    right: object
    max_bit: int
    rep: int
    _cache: dict = field(default_factory=dict, repr=False)


def _make_branch(bit, left, right) -> _Branch:
    mb = bit
    for child in (left, right):
        if isinstance(child, _Branch) and child.max_bit > mb:
            mb = child.max_bit
    return _Branch(bit, left, right, mb, left.rep if isinstance(left, _Branch) else left.path)


def _rep(node) -> int:
    return node.rep if isinstance(node, _Branch) else node.path


def _top(node, D: int) -> int:
    return node.bit if isinstance(node, _Branch) else D


def _branch_digests(node: _Branch, D: int) -> tuple[Digest, Digest, Digest]:
    hit = node._cache.get(D)
    if hit is None:
        lw = _wrapped(node.left, node.bit + 1, D)
        rw = _wrapped(node.right, node.bit + 1, D)
        hit = (node_digest(lw, rw), lw, rw)
        node._cache[D] = hit
    return hit


def _wrapped(node, depth: int, D: int) -> Digest:
    """Digest of the tree node at ``depth`` on the path down to ``node``."""
    if isinstance(node, _Branch):
        x = _branch_digests(node, D)[0]
        top = node.bit
    else:
        x = node.digest
        top = D
    path = _rep(node)
    for t in range(top - 1, depth - 1, -1):
        x = node_digest(NULL_DIGEST, x) if _bit(path, t) else node_digest(x, NULL_DIGEST)
    return x


def _insert(node, leaf: _Leaf, crit: int):
    if isinstance(node, _Branch) and node.bit < crit:
        if _bit(leaf.path, node.bit):
            return _make_branch(node.bit, node.left, _insert(node.right, leaf, crit))
        return _make_branch(node.bit, _insert(node.left, leaf, crit), node.right)
    if _bit(leaf.path, crit):
        return _make_branch(crit, node, leaf)
    return _make_branch(crit, leaf, node)


def _leaves(node):
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, _Branch):
            stack.append(n.right)
            stack.append(n.left)
        elif n is not None:
            yield n


class Trie:
    """Immutable sparse Merkle trie.

    ``width`` caps the usable path length; the default uses the full
    256-bit key hash.  Smaller widths exist for brute-force testing.
    """

    __slots__ = ("_root", "_size", "width")

    def __init__(self, width: int = PATH_BITS, _root=None, _size: int = 0):
        if not 0 < width <= PATH_BITS:
            raise ValueError("width must be in 1..256")
        self.width = width
        self._root = _root
        self._size = _size

    def __len__(self) -> int:
        return self._size

    @property
    def leaf_depth(self) -> int:
        if isinstance(self._root, _Branch):
            return self._root.max_bit + 1
        return 0

    def insert(self, key: bytes, value: bytes) -> Trie:
        return self.insert_digest(key, value_digest(value))

    def insert_digest(self, key: bytes, vdigest: Digest) -> Trie:
        key = bytes(key)
        pd = key_path(key)
        p = int.from_bytes(pd, "big")
        leaf = _Leaf(p, pd, key, Digest(vdigest), leaf_digest(pd, vdigest))
        if self._root is None:
            return Trie(self.width, leaf, 1)
        near = self._root
        while isinstance(near, _Branch):
            near = near.right if _bit(p, near.bit) else near.left
        if near.key == key:
            raise DuplicateKey("key already present")
        crit = _first_diff(p, near.path)
        if crit >= self.width:
            raise PathCollision(f"paths agree on the first {self.width} bits")
        return Trie(self.width, _insert(self._root, leaf, crit), self._size + 1)

    def _find(self, key: bytes):
        p = int.from_bytes(key_path(key), "big")
        node = self._root
        while isinstance(node, _Branch):
            node = node.right if _bit(p, node.bit) else node.left
        if node is not None and node.key == key:
            return node
        return None

    def __contains__(self, key: bytes) -> bool:
        return self._find(bytes(key)) is not None

    def value_digest_of(self, key: bytes) -> Digest:
        leaf = self._find(bytes(key))
        if leaf is None:
            raise KeyNotFound("key not in trie")
        return leaf.value_digest

    def root(self) -> RootDigest:
        if self._root is None:
            return RootDigest(NULL_DIGEST)
        return RootDigest(_wrapped(self._root, 0, self.leaf_depth))

    def items(self):
        for leaf in _leaves(self._root):
            yield leaf.key, leaf.value_digest

    def _walk(self, p: int):
        """Follow path ``p``; yield (branch, sibling) pairs, return the end node."""
        D = self.leaf_depth
        sibs = []
        node = self._root
        while isinstance(node, _Branch):
            _, lw, rw = _branch_digests(node, D)
            if _first_diff(p, node.rep) < node.bit:
                break
            if _bit(p, node.bit):
                sibs.append(Sibling(node.bit + 1, lw))
                node = node.right
            else:
                sibs.append(Sibling(node.bit + 1, rw))
                node = node.left
        return node, sibs

    def prove_inclusion(self, key: bytes) -> ProofOfInclusion:
        key = bytes(key)
        p = int.from_bytes(key_path(key), "big")
        node, sibs = self._walk(p)
        if not isinstance(node, _Leaf) or node.key != key:
            raise KeyNotFound("key not in trie")
        return ProofOfInclusion(key, node.value_digest, self.leaf_depth, tuple(reversed(sibs)))

    def prove_exclusion(self, key: bytes) -> ProofOfExclusion:
        key = bytes(key)
        if self._root is None:
            return ProofOfExclusion(key, ExclusionKind.EMPTY_SUBTREE, 0, ())
        D = self.leaf_depth
        p = int.from_bytes(key_path(key), "big")
        node, sibs = self._walk(p)
        c = _first_diff(p, _rep(node))
        if c < _top(node, D):
            # the path leaves the chain above ``node`` at level c
            sibs.append(Sibling(c + 1, _wrapped(node, c + 1, D)))
            return ProofOfExclusion(key, ExclusionKind.EMPTY_SUBTREE, c + 1, tuple(reversed(sibs)))
        if node.key == key:
            raise KeyPresent("key is in trie")
        conflict = ProofOfInclusion(node.key, node.value_digest, D, tuple(reversed(sibs)))
        return ProofOfExclusion(key, ExclusionKind.CONFLICTING_LEAF, D, (), conflict)

    def dump(self) -> str:
        """Text rendering of every non-empty node, labelled by binary path."""
        if self._root is None:
            return f"G  empty  {NULL_DIGEST.hex()[:16]}"
        D = self.leaf_depth
        rows = []

        def emit(node, depth):
            # chain nodes from ``depth`` down to the node's own top
            top = _top(node, D)
            path = _rep(node)
            for t in range(depth, top):
                label = "".join(str(_bit(path, i)) for i in range(t)) or "G"
                rows.append((t, label, "node", _wrapped(node, t, D)))
            label = "".join(str(_bit(path, i)) for i in range(top)) or "G"
            if isinstance(node, _Branch):
                rows.append((top, label, "node", _branch_digests(node, D)[0]))
                emit(node.left, top + 1)
                emit(node.right, top + 1)
            else:
                rows.append((top, label, "leaf", node.digest))

        emit(self._root, 0)
        rows.sort(key=lambda r: (r[0], r[1]))
        width = max(len(r[1]) for r in rows)
        return "\n".join(f"{label:<{width}}  {kind}  {dg.hex()[:16]}" for _, label, kind, dg in rows)
