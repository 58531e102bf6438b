"""Binned generalized CuSum: quickest change detection with an unknown post-change law."""
from .binning import (
    BinPartition,
    assign_bins,
    bin_index,
    bin_masses_of,
    is_distinguishable,
    partition_from_pdf,
    partition_from_samples,
    smallest_distinguishable_n,
)
from .detector import (
    BGCuSum,
    DetectorConfig,
    DetectorState,
    StoppingReport,
    detector_init,
    detector_step,
    run_until_stop,
    shat_statistic,
    stilde_direct,
)
from .distributions import GeneralizedPdf, gaussian, kl_binned, laplace, mixture, moment, sample, uniform
from .evaluation import (
    ExperimentSpec,
    MonteCarloReport,
    add_slope_study,
    calibrate_threshold,
    estimate_add,
    estimate_arl_direct,
    estimate_arl_renewal,
    growth_rate_check,
)
from .nselect import NSelectionParams, check_prop_a1, choose_n, crossing_set, mn_bounds

__version__ = "0.1.0"
