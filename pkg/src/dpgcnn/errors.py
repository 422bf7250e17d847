"""Error taxonomy shared by every subpackage.

The cli maps these families onto its exit codes: ParseError -> 2,
PreconditionError -> 3, DivergedLoss -> 4, GradcheckFailed -> 5.
"""

from __future__ import annotations

from typing import List, Optional


class DpgcnnError(Exception):
    """Root of all errors raised by this package."""


# ---------------------------------------------------------------------------
# Parse failures (bad files, bad config documents)
# ---------------------------------------------------------------------------


class ParseError(DpgcnnError):
    """An input file or document could not be parsed."""


class MalformedLine(ParseError):
    """A line of a TSV input does not match the expected layout."""

    def __init__(self, path: str, line_no: int, reason: str) -> None:
        self.path = path
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"{path}:{line_no}: {reason}")


class InconsistentWidth(ParseError):
    """Rows of a feature table disagree on the number of features."""


class ConfigError(ParseError):
    """An experiment or application config document is invalid."""


# ---------------------------------------------------------------------------
# Precondition violations
# ---------------------------------------------------------------------------


class PreconditionError(DpgcnnError):
    """Inputs are well-formed but violate an operation's precondition."""


class IndexOutOfRange(PreconditionError):
    """A vertex, row or segment index is outside its valid range."""


class DuplicateArc(PreconditionError):
    """An arc list contains the same (src, dst) pair more than once."""


class ModeRequiresUndirected(PreconditionError):
    """classic_line_graph dualization was requested on a directed graph."""


class ShapeMismatch(PreconditionError):
    """Tensor shapes are incompatible for the requested operation."""


class EmptySegment(PreconditionError):
    """A softmax segment has no rows."""


class EmptyNeighborhood(EmptySegment):
    """A vertex has no incoming arcs to attend over."""


class EmptyMask(PreconditionError):
    """A loss or metric was requested over an empty row mask."""


class NonScalarLoss(PreconditionError):
    """backward was called on a tensor that is not 1x1."""


class NonFiniteValue(PreconditionError):
    """A NaN or Inf appeared while the tape runs in debug mode."""


class OverlappingSplits(PreconditionError):
    """Train, validation and test sets share ids."""


class UnknownId(PreconditionError):
    """A split references an id missing from the content table."""


class InfeasibleSplit(PreconditionError):
    """Requested split sizes cannot be drawn from the available vertices."""


class TooFewEdges(PreconditionError):
    """A link task fraction rounds down to zero labeled edges."""


class DimensionMismatch(PreconditionError):
    """A model spec does not fit the dataset it is applied to."""


# ---------------------------------------------------------------------------
# Training failures
# ---------------------------------------------------------------------------


class DivergedLoss(DpgcnnError):
    """Training produced a non-finite loss."""

    def __init__(self, seed: int, epoch: int, loss: float) -> None:
        self.seed = seed
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"loss diverged to {loss} at epoch {epoch} (seed {seed})")


class SweepRunError(DpgcnnError):
    """A single run of a seed sweep failed."""

    def __init__(self, seed: int, cause: BaseException) -> None:
        self.seed = seed
        self.cause = cause
        super().__init__(f"run with seed {seed} failed: {cause}")

    @property
    def diverged(self) -> bool:
        return isinstance(self.cause, DivergedLoss)


class GradcheckFailed(DpgcnnError):
    """Some gradient suite exceeded its relative-error threshold."""

    def __init__(self, scopes: List[str]) -> None:
        self.scopes = scopes
        super().__init__(f"gradcheck failed for {', '.join(scopes)}")


def exit_code_for(exc: Optional[BaseException]) -> int:
    """Map an exception onto the documented cli exit code."""
    if exc is None:
        return 0
    if isinstance(exc, SweepRunError):
        return exit_code_for(exc.cause)
    if isinstance(exc, (ParseError, FileNotFoundError, IsADirectoryError)):
        return 2
    if isinstance(exc, PreconditionError):
        return 3
    if isinstance(exc, DivergedLoss):
        return 4
    if isinstance(exc, GradcheckFailed):
        return 5
    return 1
