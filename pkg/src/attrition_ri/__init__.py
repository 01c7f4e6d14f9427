"""Worst-case randomization inference for always-reporter treatment effects
in completely randomized experiments with attrition."""

from .asymptotic import MixtureSpec, asymptotic_decision, chi2_cdf1, mixture_quantile
from .continuous import ContinuousConfig, heuristic_p, p_upper_bound, worst_case_continuous
from .core import (Dataset, ReportingTable, StratumLabel, TableFamily, build_family,
                   classify_unit)
from .decision import Decision, KDiagnostic
from .errors import (AttritionRIError, EmptyControlReporters, InvariantViolation,
                     NoFeasibleTable, ParseError, SupportTooLarge)
from .exact import worst_case_small_support
from .io import load_csv, load_report, write_report
from .pretest import PretestSide, prune, pretest_p
from .simulation import SimulationConfig, run_study, simulate_dataset
from .statistics import StatKind, stat, stat_from_counts

__version__ = "0.1.0"
