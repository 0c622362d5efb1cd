"""Exception hierarchy shared across the toolkit.

Everything numeric raises a subclass of :class:`ToolkitError`, which the CLI
maps to exit code 2.  Plain ``ValueError``/``TypeError`` are reserved for
programming mistakes (bad argument types, malformed inputs).
"""


class ToolkitError(Exception):
    """Base class for all domain errors raised by wdrokit."""


class DimensionMismatch(ToolkitError):
    """Vector/matrix shapes do not chain."""


class ShapeMismatch(DimensionMismatch):
    """Mask or halfspace shapes do not match the network."""


class DimensionTooLarge(ToolkitError):
    """An exact enumeration would exceed its hard cap."""


class WrongActivation(ToolkitError):
    """Operation requires ReLU (or smooth) activation and got the other."""


class DegeneratePoint(ToolkitError):
    """A ReLU pre-activation sits on a kink; the Jacobian is not unique."""


class EmptyInventory(ToolkitError):
    """A certificate was requested over an empty mask inventory."""


class AllDegenerate(ToolkitError):
    """Every dataset point sits on a cell boundary."""


class NoRootSample(ToolkitError):
    """No dataset point carries the class required by a witness ray."""


class CellEscape(ToolkitError):
    """A ray that should stay inside its cell left it; cone-margin bug."""


class LabelMassMismatch(ToolkitError):
    """Per-label masses differ, so the label-preserving transport cost is infinite."""


class LpError(ToolkitError):
    """The LP solver was handed a problem outside its contract."""
