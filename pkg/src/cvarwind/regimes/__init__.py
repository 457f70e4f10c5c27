"""Atmospheric mode classification: standardise, PCA, SOM, k-means."""

from .classifier import ModeClassifier, assign_modes
from .fields import FieldStack, load_fields, write_fields
from .kmeans import ModeGrouping, NodeKMeans, canonical_labels, davies_bouldin, kmeans_nodes
from .preprocessing import PCAReducer, Standardizer, pca_fit, pca_project, standardize
from .som import SelfOrganizingMap, bmu_indices, hex_coordinates, quantization_error, som_bmu, som_train
from .stats import ModeStats, mode_stats, run_lengths

__all__ = [
    "FieldStack",
    "ModeClassifier",
    "ModeGrouping",
    "ModeStats",
    "NodeKMeans",
    "PCAReducer",
    "SelfOrganizingMap",
    "Standardizer",
    "assign_modes",
    "bmu_indices",
    "canonical_labels",
    "davies_bouldin",
    "hex_coordinates",
    "kmeans_nodes",
    "load_fields",
    "mode_stats",
    "pca_fit",
    "pca_project",
    "quantization_error",
    "run_lengths",
    "som_bmu",
    "som_train",
    "standardize",
    "write_fields",
]
