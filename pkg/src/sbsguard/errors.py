"""Exception types shared across the package."""


class InvalidParameterError(ValueError):
    """A physical or numerical parameter is outside its admissible range."""


class InfeasibleError(ValueError):
    """The requested quantity does not exist for the given inputs (e.g. zero signal)."""


class NonPhysicalChannelError(ValueError):
    """A channel output violates the uncertainty principle beyond tolerance."""


class TailMassError(ValueError):
    """A Fock-space truncation discards more probability than allowed."""


class DegeneratePovmError(ValueError):
    """The SLD eigenbasis construction is degenerate (noise-matched attacker).

    The SLD is then purely linear in the quadratures; the optimal measurement is
    homodyne along the displacement direction.
    """
