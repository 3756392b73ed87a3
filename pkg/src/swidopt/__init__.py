"""Optimization, analysis and simulation of multiuser switched-diversity
scheduling, benchmarked against full-feedback selection diversity."""

from .analytics import (NEVER_FLAG, PerformanceReport, Provenance, Scenario, ThresholdVector, User,
                        conditional_rate, expected_rates, snr_threshold_view)
from .channel import (ChannelModel, Family, GenericRate, NetworkKind, NetworkSpec, RateDistribution,
                      RayleighRate, build_network, rate_cdf, rate_from_snr, rate_pdf, sample_rate,
                      snr_from_rate, snr_pdf)
from .metrics import (FairnessSummary, convert_units, fairness_summary, gap_vs_full_feedback,
                      jain_index, mud_gain_metric)
from .numerics import (QuadratureSpec, RootSpec, exp_integral_e1, find_root, integrate)
from .optimize import (Objective, OptimizationResult, optimize_pf, optimize_weighted_sum,
                       pf_threshold, stationarity_residual)
from .region import (RegionCurve, Scheme, SequenceStrategy, order_users, sweep_region,
                     timeshare_hull)
from .seld import seld_iid_sum_capacity, seld_proportional_fair, seld_rates
from .simulator import (FeedbackStats, MonitorState, SimConfig, TerminalBehavior,
                        detect_misbehavior, feedback_load_comparison, simulate)

__version__ = "0.1.0"
