from .experiments import SUITES, BenchConfig, BenchReport, Row, run_suite
from .report import plot_series, write_csv, write_plot_json
from .translate_server import TranslateClient, TranslateServer, load_dictionary, write_dictionary
from .workload import SizeDistribution, gen_workload, sample_sizes

__all__ = [
    "SUITES",
    "BenchConfig",
    "BenchReport",
    "Row",
    "SizeDistribution",
    "TranslateClient",
    "TranslateServer",
    "gen_workload",
    "load_dictionary",
    "plot_series",
    "run_suite",
    "sample_sizes",
    "write_csv",
    "write_dictionary",
    "write_plot_json",
]
