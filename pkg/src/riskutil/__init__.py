"""Risk-sensitive utility learning from demonstrations in tabular MDPs."""
from .caty import classify, compatibility, expert_distribution, relative_compatibility
from .discretization import Grid, ReturnDistribution, cramer2, discretize_reward, project_categorical, wasserstein1
from .errors import (BudgetError, CapExceededError, CoverageError, ElicitationError, InfeasibleError,
                     InputError, RiskUtilError)
from .estimation import EmpiricalModel, explore
from .identifiability import elicit_utility, feasible_membership, planner_oracle, transfer_diagnostic
from .mdp import (HistoryPolicy, Mdp, RsMdp, Trajectory, expected_utility_exact, simulate,
                  trajectory_return)
from .planner import EnlargedPolicy, best_markovian, brute_force_optimal, lift_policy, plan
from .returns import DemoDataset, empirical_distribution, erd, rollout
from .tractor import LearnRecord, TractorConfig, learn, theory_step_size
from .utility import DiscretizedUtility, Utility, builtin_utility, discretize_utility, project_polytope
from .zoo import ingest_survey_policy, random_mdp, zoo

__all__ = [name for name in dir() if not name.startswith("_")]
