"""Figure rendering for the optimizer's experiment CSVs.

Reads only the documented trace / sweep / comparison CSV schemas and
renders four figure kinds: step-size traces, step-size differences,
per-kappa metric curves with the composite-score minimum marked, and the
paired head-to-head comparison chart.
"""

from psaes_plots.figures import FigureSpec, render

__all__ = ["FigureSpec", "render"]

__version__ = "0.1.0"
