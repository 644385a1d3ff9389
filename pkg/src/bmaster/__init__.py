"""Bayesian multivariate regression with combined entrywise-l1 / rowwise-l2
shrinkage, a blocked Gibbs sampler and master-predictor scoring."""

from bmaster.archive import PosteriorArchive
from bmaster.errors import (BMasterError, DomainError, EmptyResultError, InvalidInputError,
                            SingularSystemError)
from bmaster.model import (ConstraintMask, Hyperparameters, LatentState, RegressionData,
                           joint_log_density, residual_sums)
from bmaster.sampler import SamplerConfig, run_chain
from bmaster.selection import (SelectionReport, bayes_p_value, fractional_influence_scores,
                               rank_master_predictors, select_edges, subset_top_predictors)

__version__ = "0.1.0"
