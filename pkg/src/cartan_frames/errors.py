"""Exception hierarchy.

Two families: :class:`InputError` for malformed or out-of-domain inputs and
:class:`ComputeError` for numerical failures on well-formed inputs.  The CLI
maps them to exit codes 2 and 3.
"""


class CartanFramesError(Exception):
    """Base class for all package errors."""

    @property
    def code(self) -> str:
        return type(self).__name__


class InputError(CartanFramesError, ValueError):
    pass


class ComputeError(CartanFramesError):
    pass


# linalg_core
class DimensionMismatch(InputError):
    pass


class UnsupportedDimension(InputError):
    pass


class MalformedTensor(InputError):
    pass


class SingularCoframe(ComputeError):
    pass


class SingularGroupElement(ComputeError):
    pass


# curves
class DegenerateSegment(InputError):
    pass


class NonUniformGrid(InputError):
    pass


class NotOrthogonal(InputError):
    pass


class NotUnitSpeed(ComputeError):
    pass


class VanishingCurvature(ComputeError):
    def __init__(self, message, indices=()):
        super().__init__(message)
        self.indices = tuple(int(i) for i in indices)


# surfaces
class DegenerateFrame(ComputeError):
    pass


class ExpansionResidualTooLarge(ComputeError):
    pass


class NotInGroup(InputError):
    pass


class NonInjectiveMap(InputError):
    pass


# gstructure
class OddDimensionForSymplectic(InputError):
    pass


class NotPositiveDefinite(ComputeError):
    pass


class NotComplexStructure(ComputeError):
    pass


class DegenerateForm(ComputeError):
    pass


class RankDeficient(ComputeError):
    pass


# associated bundles
class MissingOverlapData(InputError):
    pass


class IncompatibleSection(ComputeError):
    pass


class SectionLeavesOrbit(ComputeError):
    def __init__(self, message, offending=()):
        super().__init__(message)
        self.offending = list(offending)


# cli / plotting
class ConfigError(InputError):
    pass


class EmptySeries(InputError):
    pass
