"""Acoustic anomaly detection with AR features and quantum / RBF one-class SVMs."""

from .armodel import ARModel, FeatureVector, autocovariance, extract_features, levinson_durbin, select_order
from .kernels import GramMatrix, KernelConfig, Standardizer, fit_standardizer, gram, gram_cross
from .ocsvm import OcSvmConfig, OcSvmModel, decision, predict_batch, train
from .quantumsim import FeatureMapConfig, QuantumState, feature_map_state, fidelity
from .signal import MachineSpec, SceneConfig, TimeSeries, load_wav, segment, spl_db, synthesize_scene

__version__ = "0.1.0"
