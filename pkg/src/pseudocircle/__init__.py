"""Nested annuli, crookedness checks and symbolic dynamics for a family of
cylinder maps built from T(x, y) = (2x, 8y) and W = s o sigma."""

__version__ = "0.1.0"

from .errors import (
    AmbiguousCrossing,
    ConfigInvalid,
    EmptyLayer,
    OutsideDomain,
    PseudocircleError,
    SearchExhausted,
    SelfIntersectingFibers,
    UnresolvedCurve,
)
from .maps import (
    Block,
    BlockSchedule,
    CylinderPoint,
    LiftPoint,
    MapId,
    WParams,
    apply_map,
    apply_s,
    apply_sigma,
    apply_T,
    apply_W,
    block_forward,
    inverse_W,
    lift_inverse_step,
)
from .annuli import (
    AnnulusChain,
    LiftedCurve,
    RectanglePartition,
    max_rect_diameter,
    membership,
    partition,
    pullback_curve,
    rasterize,
    trace_chain,
)
from .crooked import (
    Itinerary,
    find_crooked_blocks,
    has_wiggle,
    is_crooked,
    itinerary,
    reversal_locations,
)
from .symbolic import (
    SkewState,
    apply_F,
    apply_g,
    code_to_interval,
    escape_time,
    g_itinerary,
    schedule_from_code,
    transitivity_witness,
)
