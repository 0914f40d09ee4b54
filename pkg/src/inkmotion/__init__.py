"""Motion-based handwriting recognition: preprocessing, augmentation,
denoising autoencoders and four from-scratch classifiers over stylus IMU
orientation traces."""

from .sensor_data import LETTERS, Dataset, Frame, Label, Sequence, load_dataset, write_dataset
from .preprocess import ResampledSequence, preprocess_dataset, resample
from .augment import AugmentConfig, UnitQuaternion, augment_dataset
from .experiments import ExperimentConfig, run_ablation, run_experiment
from .synth import gen_dataset

__version__ = "0.1.0"

__all__ = [
    "LETTERS",
    "AugmentConfig",
    "Dataset",
    "ExperimentConfig",
    "Frame",
    "Label",
    "ResampledSequence",
    "Sequence",
    "UnitQuaternion",
    "augment_dataset",
    "gen_dataset",
    "load_dataset",
    "preprocess_dataset",
    "resample",
    "run_ablation",
    "run_experiment",
    "write_dataset",
]
