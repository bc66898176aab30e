"""Numerical laboratory for torse-forming vector fields and metric deformations."""

from torselab.config import DEFAULT, Tolerances
from torselab.deform import Deformation, check_theorem
from torselab.errors import TorselabError
from torselab.geometry import Chart, MetricField, OneForm, VectorField, christoffel, covariant_derivative
from torselab.report import run_report
from torselab.scenario import Scenario, load_scenario
from torselab.torse import classify, fit_torse

__all__ = [
    "DEFAULT",
    "Chart",
    "Deformation",
    "MetricField",
    "OneForm",
    "Scenario",
    "Tolerances",
    "TorselabError",
    "VectorField",
    "check_theorem",
    "christoffel",
    "classify",
    "covariant_derivative",
    "fit_torse",
    "load_scenario",
    "run_report",
]

__version__ = "0.1.0"
