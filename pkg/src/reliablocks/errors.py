"""Exception hierarchy shared by every layer of the engine."""


class ReliablocksError(Exception):
    """Base class for all domain errors."""


class DuplicateEventId(ReliablocksError):
    pass


class MalformedEvent(ReliablocksError):
    pass


class HeadRegression(ReliablocksError):
    pass


class BlockBeyondHead(ReliablocksError):
    pass


class ScoreOutOfRange(ReliablocksError):
    pass


class ParseError(ReliablocksError):
    def __init__(self, position, reason: str):
        self.position = position
        self.reason = reason
        where = f"line {position}: " if position is not None else ""
        super().__init__(f"{where}{reason}")


# avs layer
class DuplicateOperator(ReliablocksError):
    pass


class InsufficientStake(ReliablocksError):
    pass


class UnknownOperator(ReliablocksError):
    pass


class UnknownTask(ReliablocksError):
    pass


class TaskNotOpen(ReliablocksError):
    pass


class QuorumNotReached(ReliablocksError):
    pass


class NoSubmissions(ReliablocksError):
    pass


# store layer
class IoFailure(ReliablocksError):
    pass


class ChecksumMismatch(ReliablocksError):
    def __init__(self, seq: int, offset: int):
        self.seq = seq
        self.offset = offset
        super().__init__(f"checksum mismatch at entry {seq} (byte offset {offset})")


class CorruptLog(ReliablocksError):
    pass


class ParamsMismatch(ReliablocksError):
    pass
