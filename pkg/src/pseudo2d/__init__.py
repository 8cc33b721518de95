"""Pseudo-2D surface-code layouts on bi-linear transmon arrays.

Submodules: :mod:`layout` (grids, folding, resources), :mod:`svg`,
:mod:`freqalloc` (resonator frequency plans), :mod:`fidelity` and
:mod:`czgate` (resonator-mediated CZ under photon loss), :mod:`resonator`
(S21 fitting and crosstalk) and :mod:`cli`.
"""

from .layout import (
    Encoding,
    PhysicalLayout,
    ResourceSummary,
    Role,
    SurfaceCodeSpec,
    ValidationError,
    build_grid,
    fold,
    resource_estimate,
    unfold,
)

__version__ = "0.1.0"
