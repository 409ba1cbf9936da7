"""Shared exception types.

The CLI maps these onto exit codes: parse/usage problems exit 1, binding and
feasibility problems exit 2, runtime aborts exit 3.
"""


class AdjError(Exception):
    """Base class for all engine errors."""


class QueryParseError(AdjError):
    """Malformed query text or edge-list input."""


class BindingError(AdjError):
    """Query references a relation the database cannot supply, or the
    supplied relation has the wrong arity."""


class FeasibilityError(AdjError):
    """No share vector satisfies the memory constraint within the search cap."""


class MemoryBudgetExceeded(AdjError):
    """A worker pulled more tuples than the per-worker budget allows."""

    def __init__(self, worker, pulled, budget, relations):
        self.worker = worker
        self.pulled = pulled
        self.budget = budget
        self.relations = tuple(relations)
        super().__init__(
            f"worker {worker} pulled {pulled} tuples, budget {budget}; "
            f"offending relations: {', '.join(self.relations)}"
        )


class CursorProtocolError(AdjError):
    """A trie cursor was used against its protocol (seek backward, key at
    root, descend past a leaf)."""


class PlanLimitError(AdjError):
    """Query exceeds the decomposition search limits."""
