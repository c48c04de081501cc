"""Face sketch synthesis and sketch-to-photo recognition on a small numpy autodiff core."""
from .config import RunConfig, load_config, parse_config
from .errors import (ConfigError, ContractError, DegenerateEmbeddingError, DimensionError, GeometryError,
                     IngestionError, IntegrityError, MiningError, SketchMatchError, StructuralError,
                     TrainingStateError, TransferError)
from .estimators import MlffClassifier, SketchRecognizer
from .featsel import CfsSelector, FeatureTable, PrincipalComponents, TopNSelector
from .model_io import FreezePlan, apply_transfer, load_weights, save_weights
from .networks import Discriminator, Generator, Mlff
from .params import NetworkParams
from .tensor import Tensor, grad_check
from .training import TrainingData, train

__version__ = "0.1.0"

__all__ = [
    "CfsSelector", "ConfigError", "ContractError", "DegenerateEmbeddingError", "DimensionError",
    "Discriminator", "FeatureTable", "FreezePlan", "Generator", "GeometryError", "IngestionError",
    "IntegrityError", "MiningError", "Mlff", "MlffClassifier", "NetworkParams", "PrincipalComponents",
    "RunConfig", "SketchMatchError", "SketchRecognizer", "StructuralError", "Tensor", "TopNSelector",
    "TrainingData", "TrainingStateError", "TransferError", "apply_transfer", "grad_check", "load_config",
    "load_weights", "parse_config", "save_weights", "train",
]
