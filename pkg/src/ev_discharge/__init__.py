"""EV trip energy and state-of-charge prediction: a longitudinal-dynamics physics
baseline with a small neural network trained on its residual error."""

__version__ = "0.1.0"

from .dataset import NoiseConfig, TripRecord, build_corpus, read_corpus, write_corpus
from .domain import DischargeSession, DrivingMode, DrivingProfile, VehicleParams, canonical_profile
from .evaluation import compute_metrics, evaluate
from .hybrid import HybridPrediction, fit_residual_model, predict, predict_batch
from .network import ResidualModel, ResidualNet, TrainConfig
from .physics import SimulationResult, simulate
from .trip import Phase, TripTrajectory, synthesize_trajectory

__all__ = [
    "DischargeSession", "DrivingMode", "DrivingProfile", "VehicleParams", "canonical_profile",
    "Phase", "TripTrajectory", "synthesize_trajectory", "SimulationResult", "simulate",
    "NoiseConfig", "TripRecord", "build_corpus", "read_corpus", "write_corpus",
    "ResidualModel", "ResidualNet", "TrainConfig", "HybridPrediction", "fit_residual_model",
    "predict", "predict_batch", "compute_metrics", "evaluate",
]
