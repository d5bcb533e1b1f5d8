"""Streaming eigendecomposition of covariance matrices."""

from .batch import EigenBasis, batch_pca, canonicalize_signs
from .errors import (ConfigError, CSVFormatError, DegeneracyError, DimensionError, DivergenceError,
                     NonFiniteError, SecularConvergenceError, StreamPCAError)
from .evaluation import (brownian_eigenbasis, brownian_matrix, brownian_sample,
                         compression_loss, eigenspace_error, inject_missing)
from .fpca import FpcaDesign, back_map, build_design, grid_eigenvectors, project_curve
from .imputation import MaskedVector, eblup_impute
from .incremental import ipca_update
from .moments import StreamMoments, batch_covariance, update_covariance, update_mean
from .perturbation import perturb_approx_update, rank_one_eigh, secular_update, solve_secular
from .stochastic import (CcipcaState, LearningSchedule, ccipca_update, gha_update,
                         sga_update_exact, sga_update_nn, snl_update_exact, snl_update_nn)

__version__ = "0.1.0"
