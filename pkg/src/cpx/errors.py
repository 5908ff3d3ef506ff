"""Exception hierarchy shared by every protocol module."""


class CpxError(Exception):
    """Base class for protocol errors."""


class ValidationError(CpxError):
    pass


# crypto
class EmptyStatement(CpxError):
    pass


# registry
class NotFound(CpxError):
    pass


class DuplicateDid(CpxError):
    pass


class DuplicateSchema(CpxError):
    pass


class UnknownAuthor(CpxError):
    pass


class BadSignature(CpxError):
    pass


class StaleVersion(CpxError):
    pass


class ShrinkingSet(CpxError):
    pass


# connections
class NoPublicDid(CpxError):
    pass


class InvitationReused(CpxError):
    pass


class AnchorUnresolvable(CpxError):
    pass


class ReplayedOrOutOfOrder(CpxError):
    pass


class ConnectionClosed(CpxError):
    pass


# credentials
class UnknownSchema(CpxError):
    pass


class MissingAttribute(CpxError):
    pass


class ProofBindingMismatch(CpxError):
    pass


class BadRequestProof(CpxError):
    pass


# presentation
class EmptyRequest(CpxError):
    pass


class ConsentMissing(CpxError):
    pass


class SelectionInvalid(CpxError):
    pass


class UnknownRequest(CpxError):
    pass


# agents
class UnsupportedVersion(CpxError):
    pass


class CorruptExport(CpxError):
    pass


class UnknownCredential(CpxError):
    pass


# audit
class ChainBroken(CpxError):
    def __init__(self, index: int):
        super().__init__(f"audit chain broken at index {index}")
        self.index = index


# scenario
class ConfigInvalid(CpxError):
    pass


class StepFailed(CpxError):
    def __init__(self, moment: str, step: int, cause: BaseException | str):
        self.moment = moment
        self.step = step
        self.cause = cause
        super().__init__(f"moment {moment!r} step {step} failed: {cause}")
