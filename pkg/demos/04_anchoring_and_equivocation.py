# %% [markdown]
# # Anchoring provider roots in a DLT
#
# Anchoring is optional. A shared ledger collects the signed roots of many
# providers into a trie of its own, and every participant signs the result.
# Anyone holding an anchor can then check a provider's root, and a provider
# that signs two roots for one epoch gets caught.

# %%
import random

from uso import codec
from uso.anchoring import DLT, StackedProof, asset_layer, verify_stacked
from uso.crypto import generate_keypair, hash_bytes, sign
from uso.errors import ConflictingSubmission
from uso.ledger import EquivocatingProvider, IntegrityProvider, Registration

rng = random.Random(5)


def keypair():
    return generate_keypair(rng=rng)


providers = [IntegrityProvider(f"L{i}", keypair()) for i in range(3)]
owner = keypair()
d = hash_bytes(b"an update vector")
reg = Registration(owner.public, sign(owner, d), d)
providers[0].submit_registration(reg)
for p in providers:
    p.close_epoch()

low = DLT("D1", [keypair() for _ in range(3)], keypair())
for p in providers:
    low.submit_root(p.get_signed_root(0))
anchor = low.anchor()
print(f"anchor t={anchor.t} root {anchor.root.hex()[:16]}  signatures {len(anchor.sigs)}")
print("all participants signed:", anchor.verify(low.participant_keys))

# %% [markdown]
# ## Stacked proofs
#
# A registration proof under a provider root, that root proven under D1's
# anchor, and D1's anchor proven under a higher ledger D2, form one chain.
# Each layer's root must be the value proven by the layer above it.

# %%
high = DLT("D2", [keypair() for _ in range(2)], keypair())
high.submit_root(low.signed_root(0))
top = high.anchor()

stack = StackedProof((
    asset_layer(providers[0].fetch_proof(owner.public, 0), reg.value_sig),
    low.layer(providers[0].get_signed_root(0), 0),
    high.layer(low.signed_root(0), 0),
))
print(f"{len(stack.layers)} layers, {len(codec.encode(stack))} bytes")
print("verifies against the top anchor:", verify_stacked(stack, top.root))
print("verifies against D1's anchor instead:", verify_stacked(stack, anchor.root))

# %% [markdown]
# ## Catching an equivocating provider
#
# This provider shows one root to some clients and a second root, with
# phantom registrations, to others. Both carry valid signatures. When the two
# roots meet at the DLT the pair becomes transferable evidence.

# %%
liar = EquivocatingProvider("E", keypair())
liar.fork_next_close()
liar.close_epoch()
view_a, view_b = liar.get_signed_root(0, "A"), liar.get_signed_root(0, "B")
print("both views signed:", view_a.verify() and view_b.verify(), " roots equal:", view_a.root == view_b.root)

low.submit_root(view_a)
try:
    low.submit_root(view_b)
except ConflictingSubmission as exc:
    evidence = exc.evidence
    print("DLT refused the second root:", exc.code)
    print("evidence checks out for any third party:", codec.decode(codec.encode(evidence)).verify())
