"""Exception types shared across the package."""


class VmPlaceError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(VmPlaceError):
    """Invalid configuration (unknown power model, bad fleet entry, ...)."""


class ParseError(VmPlaceError):
    """Malformed workload input, with the offending line number."""

    def __init__(self, line: int, reason: str):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class InfeasiblePlacementError(VmPlaceError):
    """A placement violates host capacity; carries the violation list."""

    def __init__(self, violations):
        super().__init__(
            f"placement is infeasible ({len(violations)} violation(s), "
            f"first: {violations[0] if violations else None})"
        )
        self.violations = list(violations)


class NoFeasibleHostError(VmPlaceError):
    """The greedy scheduler found no host that can take a VM."""

    def __init__(self, vm_id):
        super().__init__(f"no feasible host for vm {vm_id!r}")
        self.vm_id = vm_id


class UnrepairableError(VmPlaceError):
    """Chromosome repair exhausted its retry budget."""


class BudgetExceededError(VmPlaceError):
    """Exhaustive enumeration would exceed the configured budget."""


class NoFeasibleAssignmentError(VmPlaceError):
    """Exhaustive enumeration found no feasible assignment at all."""
