# %% [markdown]
# # Transfers, control and double spending
#
# An asset is a chain of update vectors. Each update is signed by the key the
# previous vector named and registered with the integrity provider under that
# key. A provider accepts one registration per key, which is what stops a
# holder from spending the same state twice.

# %%
import random

from uso.anchoring import DirectResolver
from uso.asset import (
    IssuerPolicy,
    LedgerRef,
    ProofOfProvenance,
    TransferMode,
    UpdateKind,
    UpdateVector,
    Wallet,
    create_genesis,
    has_control,
    make_update,
    register_transfer,
    register_update,
    sign_genesis,
    transfer,
    verify_provenance,
)
from uso.crypto import Scheme, generate_keypair
from uso.errors import DuplicateKey
from uso.ledger import IntegrityProvider

rng = random.Random(3)
issuer = generate_keypair(Scheme.BLIND_CAPABLE, rng, bits=1024)
provider = IntegrityProvider("L", generate_keypair(rng=rng))
provider.close_epoch()
policy = IssuerPolicy({issuer.public}, DirectResolver([provider]))

alice, bob, carol = Wallet(rng), Wallet(rng), Wallet(rng)
k1 = alice.new_key()
f0 = UpdateVector(b"MINT:5", LedgerRef("L", 0), k1)
asset = create_genesis(f0.u, f0.ledger_ref, k1, sign_genesis(f0, issuer))
provenance = ProofOfProvenance()
print("fresh asset verifies:", verify_provenance(asset, provenance, policy).ok)

# %% [markdown]
# ## Sender registers
#
# Alice signs an update naming Bob's key, registers it, waits for the epoch to
# close and hands Bob the asset with a complete proof of provenance.

# %%
kb = bob.new_key()
t = transfer(asset, provenance, alice.key(asset.current_key), kb, TransferMode.SENDER_REGISTERS, provider)
provider.close_epoch()
t.complete(provider)
bundle = t.bundle()
print("bob possesses:", verify_provenance(bundle.asset, bundle.provenance, policy).ok)
asset, provenance = bundle.asset, bundle.provenance

# %% [markdown]
# ## Recipient registers
#
# Bob passes the coin to Carol and leaves registration to her. Once she has
# submitted the registration she has control: nobody else can register under
# Bob's key. Possession, a verifiable proof of provenance, follows only when
# the epoch closes.

# %%
kc = carol.new_key()
t = transfer(asset, provenance, bob.key(asset.current_key), kc, TransferMode.RECIPIENT_REGISTERS)
bundle = t.bundle()
pending = register_transfer(bundle, provider)
print("carol has control:", has_control(bundle.asset, provider))
print("carol possesses yet:", verify_provenance(bundle.asset, bundle.provenance, policy).ok)
provider.close_epoch()
provenance = bundle.provenance.extend(pending.collect(provider))
asset = bundle.asset
print("after the close:", verify_provenance(asset, provenance, policy).ok)

# %% [markdown]
# ## A double spend
#
# Carol signs two different updates with the same key. The provider takes the
# first and refuses the second, so only one recipient ends up with control.

# %%
key = carol.key(asset.current_key)
to_dave, _ = make_update(asset, UpdateKind.TRANSFER, None, Wallet(rng).new_key(), key)
to_erin, _ = make_update(asset, UpdateKind.TRANSFER, None, Wallet(rng).new_key(), key)
register_update(to_dave, provider)
try:
    register_update(to_erin, provider)
except DuplicateKey as exc:
    print("second registration refused:", exc.code, "original epoch", exc.context["original_epoch"])
provider.close_epoch()
print("dave controls:", has_control(to_dave, provider), " erin controls:", has_control(to_erin, provider))
