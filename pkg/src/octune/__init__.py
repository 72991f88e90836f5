"""One-class data descriptors with fast validation and hyperparameter search."""
from . import dataset, descriptors, neighbors, stats, svm, validation
from .dataset import Dataset, OneClassProblem, derive_problems, load_csv
from .descriptors import DescriptorSpec, default_spec, fit
from .validation import ObjectiveHandle, auroc

__version__ = "0.1.0"
