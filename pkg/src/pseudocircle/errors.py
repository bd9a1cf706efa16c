"""Error types; each carries the machine-readable code used by the CLI."""


class PseudocircleError(Exception):
    code = "ERROR"
    exit_status = 1


class ConfigInvalid(PseudocircleError):
    code = "CONFIG_INVALID"
    exit_status = 2


class UnresolvedCurve(PseudocircleError):
    code = "UNRESOLVED_CURVE"
    exit_status = 3


class SelfIntersectingFibers(PseudocircleError):
    code = "SELF_INTERSECTING_FIBERS"
    exit_status = 4


class AmbiguousCrossing(PseudocircleError):
    code = "AMBIGUOUS_CROSSING"
    exit_status = 5


class SearchExhausted(PseudocircleError):
    code = "SEARCH_EXHAUSTED"
    exit_status = 6


class OutsideDomain(PseudocircleError):
    code = "OUTSIDE_DOMAIN"
    exit_status = 7


class EmptyLayer(PseudocircleError):
    code = "EMPTY_LAYER"
    exit_status = 8


ALL_ERRORS = (ConfigInvalid, UnresolvedCurve, SelfIntersectingFibers,
              AmbiguousCrossing, SearchExhausted, OutsideDomain, EmptyLayer)
