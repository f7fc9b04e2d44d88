"""Data-driven emulators (echo state network, MLP, LSTM) for the slow tier of
a three-tier Lorenz 96 system, with the integrator, metrics and experiment
harness needed to compare them."""
from ._accel import backend
from .errors import (CapacityError, ConfigError, DegenerateDataError, DivergenceError,
                     FormatError, L96EmuError, NumericalError)

__version__ = "0.1.0"
