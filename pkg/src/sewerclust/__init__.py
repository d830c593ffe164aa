"""sewerclust: group sewer sub-catchments by hydraulic behaviour and rank
them for priority control.

The library covers water-level feature extraction with a complex Morlet
wavelet, three clustering methods (k-means, Ward hierarchical, SOM) with
silhouette-guided model selection, PCA-based interpretation and ranking,
and NSE/R^2 calibration scoring. The `sewerclust` command runs the whole
pipeline over a dataset manifest.
"""

from .calibration import CalibrationScore, evaluate, nse, r_squared
from .cluster import (ClusterAssignment, Dendrogram, KMeansState, SomGrid,
                      adjusted_rand_index, align_labels, cut_dendrogram, hca_ward,
                      kmeans, select_k, silhouette, som_clusters, som_grid_size,
                      som_train)
from .errors import ConfigError, DataError, DependencyError, SewerclustError
from .features import FeatureMatrix, assemble, inverse_scale, scale
from .ingest import (AttributeTable, FlowPair, LevelSeries, load_manifest,
                     mean_filling_degree, parse_attribute_table, parse_flow_pair,
                     parse_level_series)
from .pca import (PcaResult, PriorityRule, cluster_scores, loading_extremes, pca,
                  rank_clusters)
from .pipeline import RunConfig, run_pipeline
from .wavelet import (MorletParams, VarianceCurve, WaveletSpectrum, cwt,
                      log_scale_grid, top_periods, wavelet_variance)

__version__ = "0.1.0"
