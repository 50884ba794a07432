"""Exception hierarchy shared by every module of the package."""


class GeboError(Exception):
    """Base class for all errors raised by gebo_package."""


# Space
class SpaceError(GeboError, ValueError):
    pass


class EmptySpace(SpaceError):
    pass


class BadBounds(SpaceError):
    pass


class BadCardinality(SpaceError):
    pass


class DuplicateName(SpaceError):
    pass


class InvalidConfiguration(SpaceError):
    pass


# Graphs
class GraphError(GeboError):
    pass


class EmptyCenter(GraphError, ValueError):
    pass


class CenterOutOfRange(GraphError, ValueError):
    pass


class NotConnected(GraphError, ValueError):
    pass


class NoConvergence(GraphError):
    pass


class TooLarge(GraphError, ValueError):
    pass


class DegenerateInput(GraphError, ValueError):
    pass


# Bandit
class BanditError(GeboError):
    pass


class NonFiniteWeight(BanditError):
    pass


class MissingSnapshot(BanditError):
    pass


class RewardOutOfRange(BanditError, ValueError):
    pass


class StaleSnapshot(BanditError, ValueError):
    pass


# Neural model
class ModelError(GeboError):
    pass


class SlotOutOfRange(ModelError, IndexError):
    pass


class EmptyBatch(ModelError, ValueError):
    pass


class NonFiniteLoss(ModelError):
    pass


# Gaussian process
class SurrogateError(GeboError):
    pass


class CholeskyFailure(SurrogateError):
    pass


class DegenerateTargets(SurrogateError):
    pass


class TooFewPoints(SurrogateError, ValueError):
    pass


# Objectives
class ObjectiveError(GeboError):
    pass


class Timeout(ObjectiveError):
    pass


class ProtocolError(ObjectiveError):
    pass


class ProcessDied(ObjectiveError):
    pass
