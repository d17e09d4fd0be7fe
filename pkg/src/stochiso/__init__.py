"""Stochastic phase and isostable coordinates of planar SDE oscillators
computed from the leading spectrum of the backward Kolmogorov operator."""

from .errors import (ClassificationError, ConfigError, EvaluationError, ExpressionSyntaxError,
                     NotOscillatoryError, NumericalError, StochIsoError)
from .grid import Grid, ScalarField, build_grid, interpolate
from .model import BUILTIN_NAMES, Domain, ModelSpec, builtin_model, load_model_config, make_model
from .operator import apply, assemble_backward, assemble_forward
from .pipeline import analyze
from .spectral import classify, leading_spectrum, stationary_density

__version__ = "0.1.0"
