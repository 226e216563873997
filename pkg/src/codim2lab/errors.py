"""Exception types shared across the library.

Numerical refusals are deliberate: near rank thresholds or degenerate frames
the geometric classification is discontinuous in the data, so operations
raise instead of extrapolating.
"""


class Codim2LabError(Exception):
    """Base class for all library errors."""


class AmbiguousRank(Codim2LabError):
    """A singular value sits within a decade of the rank cutoff.

    Signals the caller to refine the tolerance rather than trust the
    rank decision.
    """


class DomainViolation(Codim2LabError):
    """A parameter point lies outside the chart domain."""


class DegenerateMetric(Codim2LabError):
    """Induced metric is numerically singular at the requested point."""


class RankDeficient(Codim2LabError):
    """Chart differential has rank < n; the map is not an immersion there."""


class NoQuadrantFrame(Codim2LabError):
    """The cone of α(X, X) values is wider than a quarter circle.

    This means the curvature condition the frame relies on is violated
    at the probed point.
    """


class FrameNotSmooth(Codim2LabError):
    """Normal frame is not uniquely determined near the probe point."""


class NullityNotLine(Codim2LabError):
    """Nullity space is not one-dimensional where a line field was needed."""


class LeafNotClosed(Codim2LabError):
    """A nullity leaf left the fundamental domain without a deck return."""


class DegenerateCritical(Codim2LabError):
    """Height function has a nearly degenerate critical point."""


class CNotPositive(Codim2LabError):
    """Block of A on ker B is not positive definite (kernels intersect)."""


class BandNotFlat(Codim2LabError):
    """Strip construction failed its developability residual check."""


class BandSelfCheck(Codim2LabError):
    """Strip periodicity identity failed beyond tolerance."""


class ProfileNotC2Matched(Codim2LabError):
    """Cap profile does not match the flat collar to second order."""


class DeckNotIsometric(Codim2LabError):
    """Deck transformation fails the metric pullback check."""
