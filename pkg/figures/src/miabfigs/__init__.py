"""miabfigs: renders connection-time bars, buffer time series and throughput
CDF figures from miabsim CSV outputs."""

from .io import RunData, SchemaError, load_run, percentile_linear
from .plots import plot_buffer_timeseries, plot_connection_bars, plot_throughput_cdf, render_all

__version__ = "0.1.0"

__all__ = [
    "RunData",
    "SchemaError",
    "load_run",
    "percentile_linear",
    "plot_buffer_timeseries",
    "plot_connection_bars",
    "plot_throughput_cdf",
    "render_all",
    "__version__",
]
