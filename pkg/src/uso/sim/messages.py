"""Wire types used only by the simulator, plus the figure message labels."""

from __future__ import annotations

from dataclasses import dataclass

from ..anchoring import AnchorRoot, StackLayer
from ..codec import canonical
from ..crypto import VerifyingKey
from ..ledger import SignedRoot


@canonical(0x60)
@dataclass(frozen=True)
class AuthRequest:
    account: str
    amount: int


@canonical(0x61)
@dataclass(frozen=True)
class ErrorReply:
    code: str
    message: str


@canonical(0x62)
@dataclass(frozen=True)
class RootList:
    roots: tuple[SignedRoot, ...]


@canonical(0x63)
@dataclass(frozen=True)
class AnchorQuery:
    ledger_id: str
    epoch: int


@canonical(0x64)
@dataclass(frozen=True)
class AnchorProof:
    """One stack layer plus the anchor it verifies against.

    ``published`` is the DLT's own anchor as a SignedRoot, ready to be
    looked up in a higher ledger.
    """

    layer: StackLayer
    anchor: AnchorRoot
    published: SignedRoot


@canonical(0x65)
@dataclass(frozen=True)
class ProofQuery:
    key: VerifyingKey
    epoch: int


# Numbered arrows of the three sequence diagrams.
FIG2 = (
    ("consumer", "bank", "(1) B"),
    ("bank", "minter", "(2) B"),
    ("minter", "bank", "(3) B'"),
    ("bank", "consumer", "(4) B'"),
    ("consumer", "bank", "(5) w,b(h(F0))"),
    ("bank", "minter", "(6) F~,b(h(F0))"),
    ("minter", "bank", "(7) s(b(h(F0)))"),
    ("bank", "consumer", "(8) s(b(h(F0)))"),
)

FIG3 = (
    ("consumer", "bank", "(3) w,beta(F0)"),
    ("bank", "bulletin_board", "(4) F~,beta(F0)"),
    ("bulletin_board", "bank", "(5) p(G_BB,t,k_b,(F~,beta(F0)))"),
    ("bank", "consumer", "(6) p(G_BB,t,k_b,(F~,beta(F0)))"),
)

FIG4_SENDER = (
    ("recipient", "sender", "(1) k_{j+1}"),
    ("sender", "relay", "(2) k_j,s(h(F_j),k_j)"),
    ("relay", "sender", "(3) p(G_L,i,k_j,h(F_j))"),
    ("sender", "recipient", "(4) F_j,P_j"),
)

FIG4_RECIPIENT = (
    ("recipient", "sender", "(1) k_{j+1}"),
    ("sender", "recipient", "(2) F_j,P_{j-1},k_j,s(h(F_j),k_j)"),
    ("recipient", "relay", "(3) k_j,s(h(F_j),k_j)"),
    ("relay", "recipient", "(4) p(G_L,i,k_j,h(F_j))"),
    ("recipient", "sender", "(5) p(G_L,i,k_j,h(F_j))"),
)

FIGURES = {
    "fig2": FIG2,
    "fig3": FIG3,
    "fig4-sender": FIG4_SENDER,
    "fig4-recipient": FIG4_RECIPIENT,
}


def label(figure: str, step: int) -> str:
    """Label of the arrow numbered ``step`` in ``figure``."""
    for _, _, text in FIGURES[figure]:
        if text.startswith(f"({step})"):
            return text
    raise KeyError(f"{figure} has no step {step}")
