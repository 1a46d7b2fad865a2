# %% [markdown]
# # Withdrawing and redeeming tokens
#
# A bank debits an account and a minter signs the new token's genesis vector
# without ever seeing it. There are two ways to do that. One uses blind RSA
# signatures. The other commits to the vector and has the bank post the
# commitment on a public bulletin board.

# %%
import random

from uso.anchoring import DirectResolver
from uso.asset import IssuerPolicy, LedgerRef, ProofOfProvenance, Wallet, verify_provenance
from uso.crypto import generate_keypair
from uso.ledger import IntegrityProvider
from uso.mint import Bank, BulletinBoard, Minter, chaum_withdraw, prepare_redemption, redeem, zkp_withdraw

rng = random.Random(7)
bank = Bank("bank", rng)
minter = Minter(bank.public, rng, bits=1024)
bank.recognise_minter(minter.public_keys)
bank.open_account("alice", 100)
bank.open_account("bob", 0)

provider = IntegrityProvider("L", generate_keypair(rng=rng))
provider.close_epoch()
board = BulletinBoard("BB", generate_keypair(rng=rng), [bank.public])
policy = IssuerPolicy(set(minter.public_keys.values()) | {bank.public}, DirectResolver([provider, board]))
alice = Wallet(rng)

# %% [markdown]
# ## Blind signatures
#
# Eight messages pass through the bank. The minter only sees a blinded digest
# and a bank voucher for the amount.

# %%
w = bank.authorise("alice", 10)
coin = chaum_withdraw(alice, bank, minter, w, LedgerRef("L", 0), rng)
for m in coin.transcript:
    print(f"({m.step}) {m.src:>8s} -> {m.dst:<8s} {m.label}")

digest = bytes(coin.asset.genesis.vector.digest())
print("token verifies:", verify_provenance(coin.asset, ProofOfProvenance(), policy).ok)
print("bank ever saw h(F0):", bank.view.contains(digest), " minter:", minter.view.contains(digest))
print("alice balance:", bank.balances["alice"])

# %% [markdown]
# ## Commitments on a bulletin board
#
# Here the bank endorses a hiding commitment and posts it. The token carries
# the opening and the board's inclusion proof as its genesis authority.

# %%
w = bank.authorise("alice", 5)
note = zkp_withdraw(alice, bank, board, w, LedgerRef("L", 0), rng)
for m in note.transcript:
    print(f"({m.step}) {m.src:>14s} -> {m.dst:<14s} {m.label}")
print("token verifies:", verify_provenance(note.asset, ProofOfProvenance(), policy).ok)

# %% [markdown]
# ## Redemption
#
# To redeem, the holder registers a final update that hands the token to the
# bank's sink key. The bank checks provenance and credits an account once.

# %%
spent, prov = prepare_redemption(alice, coin.asset, ProofOfProvenance(), bank, provider)
credit = redeem(bank, "bob", spent, prov, policy)
print(f"credited {credit.amount} to {credit.account}, balance {credit.balance}")
try:
    redeem(bank, "bob", spent, prov, policy)
except Exception as exc:
    print("second attempt:", exc.code)

outstanding = 5
print("conservation:", bank.balances["alice"] + bank.balances["bob"] + outstanding == 100)
