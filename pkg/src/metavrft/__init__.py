"""Meta-learning of model-reference controllers from small datasets."""

from ._conic import InfeasibleError, SolverError
from .lti import ControllerParams, TransferFunction, combine_controllers, feedback, pi_controller, tf
from .metadesign import DesignConfig, MetaDataset, MetaEntry, MetaVRFT, MetaWeights, solve_meta
from .signals import Dataset, generate_open_loop, simulate_closed_loop, white_input
from .spectral import SpectralGrid, build_stability_constraint, delta_hat
from .vrft import VRFT, VrftProblem, vrft_tune

__version__ = "0.1.0"

__all__ = [
    "ControllerParams",
    "Dataset",
    "DesignConfig",
    "InfeasibleError",
    "MetaDataset",
    "MetaEntry",
    "MetaVRFT",
    "MetaWeights",
    "SolverError",
    "SpectralGrid",
    "TransferFunction",
    "VRFT",
    "VrftProblem",
    "build_stability_constraint",
    "combine_controllers",
    "delta_hat",
    "feedback",
    "generate_open_loop",
    "pi_controller",
    "simulate_closed_loop",
    "solve_meta",
    "tf",
    "vrft_tune",
    "white_input",
]
