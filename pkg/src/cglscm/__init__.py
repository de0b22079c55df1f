"""Centralized Gaussian linear SCMs: sampling, EM estimation and do-queries."""

from .graph import CausalDiagram, MaskSet, StructureError, build_masks, longest_path, topological_order
from .model import (CglScm, GaussianDist, GlScm, NumericalError, ParameterError, build_B,
                    gl_to_cgl, joint_ux_dist, log_likelihood, observational_dist)
from .sampler import Dataset, read_csv, sample, write_csv
from .estimation import (FitConfig, FitDivergence, FitResult, Posterior, e_step, fit, fit_edges, fit_edges,
                         fitted_model, init_params, m_objective, m_step_gradients, update_mu)
from .edge_recovery import EdgeRecoveryReport, recover_edges
from .query import DoQuery, Gaussian1D, QueryError, compare_queries, intervene, interventional_dist

__version__ = "0.1.0"
