class InvalidArgument(ValueError):
    pass


class ZeroProbabilityBranch(ArithmeticError):
    """A Kraus branch with (numerically) zero Born weight was selected."""


class DegeneratePair(ArithmeticError):
    """The second state of a paired evolution was annihilated by the Gram-Schmidt step."""


class ContinuousOutcomes(InvalidArgument, TypeError):
    """A free-energy estimator was handed records with continuous outcomes."""
