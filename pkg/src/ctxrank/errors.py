"""Exception hierarchy shared by every ctxrank module."""


class RankingError(Exception):
    """Base class for all ctxrank errors."""


# data
class MalformedLine(RankingError, ValueError):
    def __init__(self, line_no, reason=""):
        self.line_no = line_no
        msg = f"malformed line {line_no}"
        super().__init__(f"{msg}: {reason}" if reason else msg)


class NegativeLabel(RankingError, ValueError):
    def __init__(self, line_no):
        self.line_no = line_no
        super().__init__(f"negative relevance label on line {line_no}")


class FeatureIndexOutOfRange(RankingError, IndexError):
    pass


class EmptyDataset(RankingError, ValueError):
    pass


class InvalidSpec(RankingError, ValueError):
    pass


# nn core
class ShapeMismatch(RankingError, ValueError):
    pass


class BackwardBeforeForward(RankingError, RuntimeError):
    pass


class InvalidProbability(RankingError, ValueError):
    pass


class NonFiniteLoss(RankingError, FloatingPointError):
    pass


# model
class OddDimension(RankingError, ValueError):
    pass


class ConfigMismatch(RankingError, ValueError):
    pass


# losses
class AllMasked(RankingError, ValueError):
    pass


class LabelOutOfRange(RankingError, ValueError):
    pass


class BinaryWithNoClicks(RankingError, ValueError):
    pass


# metrics
class EmptySplit(RankingError, ValueError):
    pass


# harness
class ConfigError(RankingError, ValueError):
    pass


class FoldTooSmall(RankingError, ValueError):
    pass
