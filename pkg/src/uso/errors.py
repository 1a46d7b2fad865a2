"""Exception hierarchy.

Every error carries a stable ``code`` string so that simulated actors can
report failures over the wire and scenario assertions can match on them.
"""

from __future__ import annotations


class UsoError(Exception):
    code = "ERROR"

    def __init__(self, message: str = "", **context):
        super().__init__(message or self.code)
        self.context = context


class MalformedEncoding(UsoError):
    code = "MALFORMED_ENCODING"


# crypto
class SchemeMismatch(UsoError):
    code = "SCHEME_MISMATCH"


class MalformedMessage(UsoError):
    code = "MALFORMED_MESSAGE"


class FactorConsumed(UsoError):
    code = "FACTOR_CONSUMED"


# trie / ledger
class DuplicateKey(UsoError):
    code = "DUPLICATE_KEY"

    def __init__(self, message: str = "", original_epoch: int | None = None, **context):
        super().__init__(message, original_epoch=original_epoch, **context)
        self.original_epoch = original_epoch


class PathCollision(UsoError):
    code = "PATH_COLLISION"


class KeyNotFound(UsoError):
    code = "KEY_NOT_FOUND"


class KeyPresent(UsoError):
    code = "KEY_PRESENT"


class InvalidSignature(UsoError):
    code = "INVALID_SIGNATURE"


class EpochOpen(UsoError):
    code = "EPOCH_OPEN"


class UnknownEpoch(UsoError):
    code = "UNKNOWN_EPOCH"


# assets
class InvalidGenesisSig(UsoError):
    code = "INVALID_GENESIS_SIG"


class WrongKey(UsoError):
    code = "WRONG_KEY"


class WrongProvider(UsoError):
    code = "WRONG_PROVIDER"


# mint / bank
class AuthRefused(UsoError):
    code = "AUTH_REFUSED"


class DenominationUnsupported(UsoError):
    code = "DENOMINATION_UNSUPPORTED"


class DoubleRedeem(UsoError):
    code = "DOUBLE_REDEEM"


class InvalidProvenance(UsoError):
    code = "INVALID_PROVENANCE"


# anchoring
class ConflictingSubmission(UsoError):
    code = "CONFLICTING_SUBMISSION"

    def __init__(self, message: str = "", evidence=None, **context):
        super().__init__(message, **context)
        self.evidence = evidence


class InvalidOperatorSig(UsoError):
    code = "INVALID_OPERATOR_SIG"


class NotAnchored(UsoError):
    code = "NOT_ANCHORED"

    def __init__(self, message: str = "", exclusion=None, **context):
        super().__init__(message, **context)
        self.exclusion = exclusion


# simulator
class SchemaError(UsoError):
    code = "SCHEMA_ERROR"


class UnknownActor(UsoError):
    code = "UNKNOWN_ACTOR"


class StepFailure(UsoError):
    code = "STEP_FAILURE"

    def __init__(self, message: str = "", index: int | None = None, **context):
        super().__init__(message, index=index, **context)
        self.index = index


def _all_subclasses(cls):
    for sub in cls.__subclasses__():
        yield sub
        yield from _all_subclasses(sub)


def error_for_code(code: str) -> type[UsoError]:
    """Map a wire error code back to its exception class."""
    for cls in _all_subclasses(UsoError):
        if cls.code == code:
            return cls
    return UsoError
