"""Scenario sampling for power-flow surrogate training data."""
from .copula import GaussianCopulaModel, GaussianCopulaSampler, fit_copula, sample_copula
from .dataio import (TimeSeriesMatrix, generate_synthetic_dataset, load_timeseries,
                     save_timeseries)
from .grid import GridModel, build_synthetic_feeder, load_grid, save_grid
from .metrics import CoverageReport, PqCloud, convex_hull, coverage, pcm_fidelity
from .powerflow import (InjectionVector, PfSolution, SlackPowerFlow, batch_pf,
                        build_ybus, solve_nr)
from .sampling import (CorrelationSampler, CorrelationSamplingConfig, SampleSet,
                       SRSSampler, SumInterval, ThayerSampler, UniformSampler,
                       compute_sum_interval, correlation_sample, sample_srs_delta,
                       sample_thayer, sample_uniform)
from .stats import (Pcm, PartialCorrelation, partial_corr_first_order, pcm, pcm_diff,
                    pcm_reduced, pearson, summarize)

__all__ = [
    "batch_pf", "build_synthetic_feeder", "build_ybus", "compute_sum_interval",
    "convex_hull", "correlation_sample", "CorrelationSampler",
    "CorrelationSamplingConfig", "coverage", "CoverageReport", "fit_copula",
    "GaussianCopulaModel", "GaussianCopulaSampler", "generate_synthetic_dataset",
    "GridModel", "InjectionVector", "load_grid", "load_timeseries",
    "partial_corr_first_order", "PartialCorrelation", "Pcm", "pcm", "pcm_diff",
    "pcm_fidelity", "pcm_reduced", "pearson", "PfSolution", "PqCloud", "sample_copula",
    "sample_srs_delta", "sample_thayer", "sample_uniform", "SampleSet", "save_grid",
    "save_timeseries", "SlackPowerFlow", "solve_nr", "SRSSampler", "SumInterval",
    "summarize", "ThayerSampler", "TimeSeriesMatrix", "UniformSampler",
]

__version__ = "0.1.0"
