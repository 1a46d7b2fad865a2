# %% [markdown]
# # Sparse Merkle tries
#
# Every integrity provider commits to its registrations with a binary trie.
# Keys are hashed to a bit path, all leaves sit at one depth (the shortest
# depth at which the stored paths differ) and empty subtrees hash to zero.
# This walk-through builds a small trie, prints it, and checks proofs.

# %%
import random

from uso.trie import Trie, verify_exclusion, verify_inclusion

rng = random.Random(1)
trie = Trie()
for name in ("alice", "bob", "carol", "dave"):
    trie = trie.insert(name.encode(), rng.randbytes(8))

print("entries:", len(trie), " leaf depth:", trie.leaf_depth)
print(trie.dump())

# %% [markdown]
# Inserting returns a new trie, so earlier roots stay available. A proof of
# inclusion lists only the non-empty siblings from the leaf up, each tagged
# with its depth.

# %%
root = trie.root()
proof = trie.prove_inclusion(b"carol")
print("siblings:", [(s.depth, s.digest.hex()[:12]) for s in proof.siblings])
print("verifies against the root:", verify_inclusion(root, proof))

bigger = trie.insert(b"erin", b"late")
print("old root still answers:", trie.root() == root, " new root differs:", bigger.root() != root)

# %% [markdown]
# Absence is provable too. Either the key's path ends in an empty subtree, or
# it reaches a leaf that holds a different key.

# %%
for probe in (b"mallory", b"trent", b"peggy"):
    ex = trie.prove_exclusion(probe)
    print(f"{probe.decode():8s} {ex.kind.name:17s} depth {ex.depth}  verifies {verify_exclusion(root, ex)}")

# %% [markdown]
# Proof size grows with the logarithm of the number of entries.

# %%
for n in (16, 256, 4096):
    t = Trie()
    keys = [rng.randbytes(16) for _ in range(n)]
    for k in keys:
        t = t.insert(k, b"v")
    mean = sum(len(t.prove_inclusion(k).siblings) for k in keys[:200]) / min(n, 200)
    print(f"n={n:5d}  leaf depth {t.leaf_depth:2d}  mean siblings {mean:5.2f}")
