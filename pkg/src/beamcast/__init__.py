"""MVDR beamforming of a simulated array and LSTM / NAR forecasting of its output."""

from .array_model import ArrayConfig, PlaneWaveSource, SnapshotMatrix, SourceKind, steering_vector
from .beamformer import bartlett_weights, beamform, beampattern, mvdr_weights, sample_covariance, sinr
from .harness import ScenarioConfig, SweepSpec, generate_dataset, run_sweep, write_results
from .lstm import TrainConfig
from .nar import NarConfig

__version__ = "0.1.0"
