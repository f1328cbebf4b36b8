"""cxrnet: from-scratch CNN engine for chest X-ray Normal/Pneumonia classification.

Pure numpy training and inference: tensor primitives, conv/pool/dense layers
with hand-written backpropagation, Adam with a reduce-on-plateau schedule,
a seeded image pipeline with affine augmentation, ROC/PR evaluation, and a
binary checkpoint format. See the README for the pipeline walkthrough and
the ``demos/`` scripts for narrative examples.
"""

__version__ = "0.1.0"

from .datapipe import AugmentConfig, scan_dataset
from .layers import Network, binary_cnn
from .metrics import evaluate_scores
from .tensor import Prng
from .trainer import TrainConfig, build_model, evaluate, load_checkpoint, save_checkpoint, train

__all__ = [
    "AugmentConfig",
    "Network",
    "Prng",
    "TrainConfig",
    "__version__",
    "binary_cnn",
    "build_model",
    "evaluate",
    "evaluate_scores",
    "load_checkpoint",
    "save_checkpoint",
    "scan_dataset",
    "train",
]
