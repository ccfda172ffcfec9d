"""Future-guided forecasting toolkit.

A short-horizon forecaster ("teacher") distills its output distribution into
a long-horizon forecaster ("student") on discretized chaotic series, with
Page-Hinkley drift adaptation and a predictive-coding node simulator.
Submodules: mackey_glass, quantizer, neural, fgl, drift, metrics, pcoding,
dataio, harness, cli.
"""

__version__ = "0.1.0"
