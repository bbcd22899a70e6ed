"""Shared exception types. The CLI maps these onto process exit codes."""


class ConfigError(ValueError):
    """A configuration value is missing, malformed, or out of range."""


class LatticeMismatchError(ConfigError):
    """Two fields live on truncations that cannot be embedded into each other."""


class NumericsError(RuntimeError):
    """A numerical invariant failed (non-finite values, residue too large)."""


class SolverBlowupError(NumericsError):
    """Time integration produced non-finite coefficients."""

    def __init__(self, t, detail=""):
        self.t = t
        msg = f"non-finite solution coefficients at t={t:.6g}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class BudgetExceededError(RuntimeError):
    """An experiment would exceed the configured PDE-solve budget."""

    def __init__(self, estimated, budget):
        self.estimated = estimated
        self.budget = budget
        super().__init__(
            f"estimated cost {estimated} solves exceeds budget {budget}; "
            "reduce the schedule, grid, or replicate count, or raise solve_budget"
        )


class PriorRejectionError(RuntimeError):
    """Rejection sampling of the prior is effectively never accepting."""
