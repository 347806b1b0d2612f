"""Exception types. Each carries a short ``code`` used in result tables."""


class RoundoffError(Exception):
    code = "Error"

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        cls.code = cls.__name__


# geometry
class NonSimple(RoundoffError, ValueError):
    pass


class DegenerateAngle(RoundoffError, ValueError):
    pass


class DuplicateVertex(RoundoffError, ValueError):
    pass


class SeparationViolated(RoundoffError):
    pass


class Infeasible(RoundoffError):
    pass


class ShootingDiverged(RoundoffError):
    pass


class ContainmentViolated(RoundoffError):
    pass


class SelfIntersection(RoundoffError):
    pass


class NoFeasibleRhoPrime(RoundoffError):
    pass


# weights
class NegativeT(RoundoffError, ValueError):
    pass


class NonPositiveT(RoundoffError, ValueError):
    pass


class AtPuncture(RoundoffError, ValueError):
    pass


# diagnostics
class MeshMissing(RoundoffError):
    pass


class OdeStep(RoundoffError):
    pass


# mesh
class RefinementStalled(RoundoffError):
    pass


class EncroachmentLoop(RoundoffError):
    pass


# fem
class SingularElement(RoundoffError):
    pass


class CgDiverged(RoundoffError):
    pass


class IterationStalled(RoundoffError):
    pass


class OutsideDomain(RoundoffError):
    pass


# norms
class OrderUnavailable(RoundoffError):
    pass


class TooManyElements(RoundoffError):
    pass


# harness
class EmptyTable(RoundoffError):
    pass
