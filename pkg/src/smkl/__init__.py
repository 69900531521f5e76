"""Self-weighted multiple kernel learning for graph clustering and SSL."""
from .core import (FitResult, fit_clustering, fit_kgl, fit_pmkl, fit_ssl,
                   objective, update_K, update_P_clustering, update_P_ssl,
                   update_S, update_w, pmkl_update_theta, decide_labels)
from .data_io import (DataMatrix, LabelMask, LabelVector, SolverConfig, load_config,
                      load_dense_matrix, load_labels, split_labeled)
from .evaluation import clustering_accuracy, evaluate, nmi
from .kernels import KernelBank, KernelMatrix, build_bank

__version__ = "0.1.0"
