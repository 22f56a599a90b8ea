"""Exception types shared across the package."""


class NumericalError(RuntimeError):
    """A numerical routine failed (ill-conditioning, non-convergence, lost
    positive definiteness).  Callers decide whether to abort or fall back."""


class PlantDivergedError(RuntimeError):
    """The emulated plant state left the sane range, usually a sign of
    mis-tuned parameters or an unstable closed loop."""
