"""Spike-and-slab normalized random measures.

Exact partition laws, predictive weights and urn samplers for the inner
spike-and-slab construction, in which the spike atom sits inside the base
measure of a homogeneous normalized random measure.  Closed forms are
provided for the sigma-stable and normalized inverse-Gaussian cases, and a
quadrature engine handles any Levy intensity.
"""

from ._backend import BACKEND, HAVE_NUMBA
from .core import (ClusterState, HnrmiModel, PredictiveWeights, ProbTable, eppf, eppf_split,
                   kn_distribution, kn_n0_joint, log_eppf, n0_distribution, predictive,
                   variance_gap_constant)
from .nig import (NigParams, PrecisionWarning, log_rho, log_rho0, nig_eppf, nig_eppf_split,
                  nig_kn_distribution, nig_kn_n0_joint, nig_log_eppf, nig_model,
                  nig_n0_distribution, nig_predictive, rho, rho0)
from .sampler import (SampleSpec, UrnTrajectory, ValuedState, outer_sample, sample_trajectory,
                      simulate, urn_step, write_trajectories_tsv)
from .special import (gen_fact_coeff, gen_fact_table, log_gen_fact_coeff,
                      log_upper_inc_gamma_int, upper_inc_gamma_int)
from .stable import (StableParams, log_phi, phi, phi_table, stable_eppf, stable_eppf_split,
                     stable_kn_distribution, stable_kn_n0_joint, stable_log_eppf, stable_model,
                     stable_n0_distribution, stable_predictive)
from .urn import chain_n0_distribution, make_urn

__version__ = "0.1.0"

import types as _types

__all__ = [name for name, obj in list(globals().items())
           if not name.startswith("_") and not isinstance(obj, _types.ModuleType)]
