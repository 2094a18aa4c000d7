"""Exception hierarchy shared by all stpoisson modules.

Input/validation problems raise subclasses of :class:`InputError`; numerical
breakdowns raise subclasses of :class:`NumericalError`.  The CLI maps these to
exit codes 2 and 3 respectively.
"""


class StpoissonError(Exception):
    """Base class for all library errors."""


class InputError(StpoissonError):
    """Invalid input data or configuration."""


class NumericalError(StpoissonError):
    """Numerical failure during optimization."""


# -- geometry ---------------------------------------------------------------

class DegenerateGeometry(InputError):
    """Polygon ring with fewer than 3 distinct vertices, or collinear hull input."""


class DuplicateSites(InputError):
    """Two Voronoi sites coincide."""


class EmptyRegion(InputError):
    """A region with zero area where positive area is required."""


# -- discretization ---------------------------------------------------------

class OverlapError(InputError):
    """Custom subregions overlap by more than the tolerance."""


class CoverageError(InputError):
    """Custom subregions fail to cover the border."""


class BorderMismatch(InputError):
    """Two discretizations do not share the same border."""


class MissingAttribute(InputError):
    """A zone lacks the attribute required for reallocation."""


# -- aggregation ------------------------------------------------------------

class UnknownType(InputError):
    """Event type index outside the declared range."""


class InvalidFoldCount(InputError):
    """Fold count below 2."""


class EmptySample(InputError):
    """Sample contains no observations."""


# -- models -----------------------------------------------------------------

class NonPositiveIntensity(InputError):
    """Intensity must be strictly positive wherever the log-likelihood needs a log."""


class InfeasibleBeta(InputError):
    """Coefficient vector violates the covariate-model feasible set."""


class InfeasibleSet(InputError):
    """The covariate-model feasible set is empty."""


# -- optimizer --------------------------------------------------------------

class LineSearchOverflow(NumericalError):
    """Armijo halving exceeded the step-exponent cap; gradient and objective disagree."""


class MissingBox(InputError):
    """Gap-based stopping requested without box bounds."""
