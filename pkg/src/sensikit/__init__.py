"""Post-optimal sensitivity analysis for parametric nonlinear, linear and conic programs."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("sensikit")
except PackageNotFoundError:  # running from a source tree
    __version__ = "0.1.0"
