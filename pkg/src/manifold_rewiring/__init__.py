"""Walk-pooling rewiring of noisy neighborhood graphs sampled from manifolds."""
from .graph import Graph, knn_graph, read_edge_list, write_edge_list
from .kernels import BACKEND
from .mlp import MlpParams, TrainConfig, load_params, save_params, train
from .rewiring import iterative_rewire, select_trustworthy, threshold_denoise
from .walk import build_training_set, compute_walk_features

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "Graph", "MlpParams", "TrainConfig", "build_training_set", "compute_walk_features",
    "iterative_rewire", "knn_graph", "load_params", "read_edge_list", "save_params",
    "select_trustworthy", "threshold_denoise", "train", "write_edge_list",
]
