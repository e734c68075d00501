"""Numerical laboratory for growth of negatively curved cusp metrics.

Builds warped-product cusp metrics A(t)^2 dx^2 + dt^2 whose horocyclic
length profile A(t) alternates between two exponential decay rates under a
curvature pinching constraint, and measures the growth quantities the
construction is designed to separate: parabolic orbit counting,
ball-in-horoball volumes, the cuspidal volume integral, and critical
exponents of a free lattice of Mobius transformations, together with a
convergence certificate for the perturbed Poincare series.
"""

from .bridge import (
    BridgeError,
    BridgeProfile,
    BridgeSpec,
    Direction,
    FeasibilityReport,
    PinchReport,
    build_bridge,
    check_epigraph_feasibility,
    required_separation,
    verify_pinching,
)
from .geometry import (
    CuspModel,
    HoroPoint,
    ball_horoball_volume,
    exact_distance,
    flow_contraction,
    horo_distance,
    meeting_height,
    quasigeodesic_distance,
)
from .growth import (
    CountingTable,
    GrowthEstimate,
    convolve,
    cuspidal_F,
    growth_exponents,
    horospherical_area,
    max_formula,
    parabolic_counting,
    pinch_predicates,
    volume_sandwich,
)
from .lattice import (
    CertificateReport,
    GroupWord,
    SyllableDecomposition,
    certificate,
    decompose,
    displacement,
    enumerate_words,
    estimate_delta,
    partial_poincare,
    word_count,
)
from .profile import (
    IntervalSchedule,
    LogAreaProfile,
    ScheduleError,
    auto_schedule,
    build_area,
    desk_separation,
    eval_log_area,
    inverse_area,
    make_schedule,
)

__version__ = "0.1.0"
