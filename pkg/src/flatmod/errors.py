"""Exception hierarchy shared by the engines and the CLI."""


class FlatmodError(Exception):
    """Base class; the CLI maps these to exit code 1."""


class UnsupportedGroup(FlatmodError):
    pass


class WeylGroupTooLarge(FlatmodError):
    pass


class NonDominantWeight(FlatmodError):
    pass


class NearSingularElement(FlatmodError):
    pass


class InvalidCenterElement(FlatmodError):
    pass


class CutoffTooLarge(FlatmodError):
    pass


class DivergentAtZeroT(FlatmodError):
    pass


class NonInvariantPolynomial(FlatmodError):
    pass


class ExtrapolationUnstable(FlatmodError):
    pass


class TruncationInsufficient(FlatmodError):
    pass


class ArityMismatch(FlatmodError):
    pass


class UsageError(FlatmodError):
    """Malformed command line; exit code 2."""
