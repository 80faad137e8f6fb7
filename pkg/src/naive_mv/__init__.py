"""Continuous-time mean-variance portfolio policies under time inconsistency.

Implements and cross-validates the four policy families (pre-committed,
naive, weak equilibrium, regular equilibrium), a seeded Monte Carlo engine
for the wealth SDEs including the dyadic re-commitment construction, and
the analysis layer (efficient frontier, convergence diagnostics,
inefficiency checks).
"""

from .market import (BlackScholesParams, CoefficientCurve, MarketModel,
                     TargetSpec, case1_target, case2_target, convert_target,
                     gamma, growth_factor_target, rho, risk_aversion_target,
                     risk_free_target, validate_assumptions,
                     wealth_target_spec)
from .policies import (DominanceReport, NaivePolicy, Policy,
                       PreCommittedPolicy, RiskyWeightCurve, WeightPolicy,
                       ZeroPolicy, dominance_report, naive_policy,
                       naive_weight, pre_committed_policy, regular_weight,
                       regular_equilibrium_policy, weak_equilibrium_policy,
                       weak_weight_solve)
from .simulation import (EnsembleSummary, PathEnsemble, SimConfig, TimeGrid,
                         bound_curve_Y, mean_ode, moment_odes,
                         second_moment_ode, simulate_committed_2n,
                         simulate_policy_paths, simulate_policy_summary)
from .analysis import (ConvergenceRow, FrontierPoint, InefficiencyReport,
                       convergence_metric, expected_terminal_naive_closed,
                       frontier_variance, inefficiency_report,
                       precommit_equivalence_check,
                       second_moment_bound_check)
from .config import RunConfig, load_run_config
from .errors import (AlignmentError, AssumptionError, ConfigError,
                     ConvergenceError, DomainError)

__version__ = "0.1.0"
