"""Exception taxonomy shared across the toolkit.

Two broad families matter to callers: input problems (malformed files,
out-of-range parameters, unresolved references) and numerical failures
(non-convergent solves, singular systems, fits that do not improve).
The CLI maps the former to exit code 1 and the latter to exit code 2.
"""

from __future__ import annotations


class MorphGridError(Exception):
    """Base class for all toolkit errors."""

    #: "input" or "numerical"; drives the CLI exit-code mapping.
    category = "input"


class InputError(MorphGridError):
    category = "input"


class NumericalError(MorphGridError):
    category = "numerical"


# --- ingestion -------------------------------------------------------------

class MalformedRow(InputError):
    """A CSV row failed to parse; carries the 1-based row index."""

    def __init__(self, row_index: int, message: str):
        super().__init__(f"row {row_index}: {message}")
        self.row_index = row_index


class SchemaMismatch(InputError):
    """Header columns do not match the expected schema."""


class EmptyFile(InputError):
    """File contains a header but no data rows (or nothing at all)."""


class TooFewPoints(InputError):
    """Not enough samples for the requested operation."""


class SingularSystem(NumericalError):
    """Degenerate abscissae (e.g. duplicated strains) made a solve singular."""


class NoCyclesFound(InputError):
    """Cycle segmentation on a monotone record: there is nothing to split."""


class DanglingRun(InputError):
    """A loading run has no matching unloading run at the end of the record."""


class OverlapInconsistency(InputError):
    """A later cycle's envelope portion dips below the established envelope."""


# --- material calibration ---------------------------------------------------

class NegativeStrain(InputError):
    """Uniaxial evaluation requested at a strain below zero."""


class OutOfCalibrationRange(InputError):
    """Residual stress outside the span of the calibrated unloading family."""


class FitDivergence(NumericalError):
    """An optimizer failed to reduce the residual meaningfully."""


class DegenerateFamily(InputError):
    """Too few unloading members for the requested fit."""


class NonMonotoneAnchors(InputError):
    """Anchor strains do not increase with residual stress."""


class InsufficientData(InputError):
    """A fit was requested with fewer samples than parameters."""


# --- meshing / simulation ---------------------------------------------------

class DisconnectedGraph(InputError):
    """The member graph does not connect all nodes."""


class NoFixedNode(InputError):
    """Gravity is applied but no node is fixed."""


class NonConvergence(NumericalError):
    """Newton iteration exhausted without meeting the residual bound."""

    def __init__(self, step: int, iteration: int, residual: float):
        super().__init__(
            f"no convergence at load step {step}, iteration {iteration}: "
            f"relative residual {residual:.3e}"
        )
        self.step = step
        self.iteration = iteration
        self.residual = residual


class SingularStiffness(NumericalError):
    """Stiffness matrix is singular (insufficient constraints?)."""


class NoBracket(NumericalError):
    """Residual-stress search found no sign change across the family span."""


# --- measurement / workbench -------------------------------------------------

class UnresolvedReference(InputError):
    """A point reference does not resolve on the given state."""


class TooFewPairs(InputError):
    """Confidence interval needs at least two pairs."""


class InvalidDocument(InputError):
    """A JSON document failed structural validation."""


class IoFailure(MorphGridError):
    """Filesystem error while writing a result."""

    category = "input"
