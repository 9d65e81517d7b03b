"""Simulate and compile Gaussian states on reconfigurable photonic circuits."""

__version__ = "0.1.0"

from .gaussian import (  # noqa: E402
    GaussianState,
    SymplecticOp,
    coherent,
    fidelity,
    uhlmann_fidelity,
    squeezing_after_loss,
    squeezing_db,
    vacuum,
    wigner,
    wigner_slice,
)
from .circuit import (  # noqa: E402
    CircuitProgram,
    LossModel,
    VoltageFrame,
    build_two_mode_chip,
    simulate,
)
from .compiler import GaussianTarget, compile_target, decompose_pure_state, takagi  # noqa: E402

__all__ = [
    "CircuitProgram", "GaussianState", "GaussianTarget", "LossModel", "SymplecticOp", "VoltageFrame",
    "build_two_mode_chip", "coherent", "compile_target", "decompose_pure_state", "fidelity", "simulate",
    "squeezing_after_loss", "squeezing_db", "takagi", "uhlmann_fidelity", "vacuum", "wigner", "wigner_slice",
]
