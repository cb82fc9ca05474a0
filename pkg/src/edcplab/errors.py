"""Exception hierarchy shared by every module."""


class EdcpError(Exception):
    """Base class for all errors raised by edcplab."""


# modmath
class PrimeBoundExceeded(EdcpError):
    pass


class NonCoprimeModuli(EdcpError):
    pass


class Underdetermined(EdcpError):
    """The linear system does not pin down a unique solution."""


class Inconsistent(EdcpError):
    """The linear system has no solution (usually: corrupted equations)."""


# statevec
class DimensionCap(EdcpError):
    pass


class SpaceMismatch(EdcpError):
    pass


class BadDistribution(EdcpError):
    pass


class WeightExceedsAmplitude(EdcpError):
    pass


class ZeroProbabilityBranch(EdcpError):
    pass


# coset
class StateAlreadyConsumed(EdcpError):
    """A quantum state was used twice; copies only come from fresh samples."""


class IncompatiblePhaseModulus(EdcpError):
    pass


# qpke
class BadParams(EdcpError):
    pass


class ParamMismatch(EdcpError):
    pass


# reductions
class SampleBudgetExhausted(EdcpError):
    pass


class NoGapFound(EdcpError):
    pass


class LevelOverflow(EdcpError):
    pass


class ReductionFailed(EdcpError):
    pass


# attacks
class PoolExhausted(EdcpError):
    pass


# cli
class SchemaMismatch(EdcpError):
    pass
