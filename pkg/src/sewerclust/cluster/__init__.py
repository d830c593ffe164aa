"""Clustering algorithms and cross-method comparison."""

from .assignment import ClusterAssignment, canonical_order, letters
from .compare import AlignmentResult, adjusted_rand_index, align_labels
from .hca import (Dendrogram, HcaCut, Merge, cut_dendrogram, dendrogram_from_dict,
                  dendrogram_to_dict, hca_ward, to_newick)
from .kmeans import (KMeansState, KSelection, kmeans, kmeans_assignment, select_k,
                     silhouette)
from .som import (SomGrid, grid_from_dict, grid_to_dict, hex_coordinates,
                  som_clusters, som_grid_size, som_train)

__all__ = [
    "AlignmentResult", "ClusterAssignment", "Dendrogram", "HcaCut", "KMeansState",
    "KSelection", "Merge", "SomGrid", "adjusted_rand_index", "align_labels",
    "canonical_order", "cut_dendrogram", "dendrogram_from_dict", "dendrogram_to_dict",
    "grid_from_dict", "grid_to_dict", "hca_ward", "hex_coordinates", "kmeans",
    "kmeans_assignment", "letters", "select_k", "silhouette", "som_clusters",
    "som_grid_size", "som_train", "to_newick",
]
