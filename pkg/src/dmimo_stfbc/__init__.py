"""Orthogonal space-time-frequency block coding in distributed MIMO networks.

A numpy/scipy library for evaluating Alamouti-like orthogonal designs in
networks of distributed radio units: user-centric clustering from long-term
channel statistics, closed-form ergodic spectral efficiencies, Monte-Carlo
outage rates, and small-cell / SFN / MRT baselines for comparison.
"""

from .baselines import (BaselineRates, ServingMap, baseline_se, mrt_map,
                        select_rus_95, sfn_map, smallcell_map)
from .channel import (ChannelRealization, Deployment, build_correlation,
                      load_deployment, noise_variance, pathloss_linear,
                      place_on_grids, sample_realization, save_deployment)
from .clustering import (Cluster, ClusterAssignment, ClusteringTrace,
                         cluster_deployment, objective_worst_quartile,
                         step1_one_to_one, step2_merge, step3_add_antennas,
                         trial_bounds, trial_counter)
from .codes import (CodeSpec, T0_WINDOW, code_for_antennas, combine_block,
                    encode_block, get_code, symbol_channel_vector)
from .config import ConfigError, PathlossParams, SimConfig, load_config
from .harness import (RateReport, ReportRow, aggregate, run_drop,
                      run_experiment, sweep, write_report)
from .montecarlo import (OutageResult, SinrSamples, mc_mean_log, outage_se,
                         sinr_realizations)
from .rates import (ClosedFormRateEngine, EigenGroups, InterferenceProfile,
                    eigen_groups, ergodic_se_user, exp_integral_ei,
                    hypoexp_mean_log2, hypoexp_pdf, interference_profile,
                    pq_polynomials)

__version__ = "0.1.0"
