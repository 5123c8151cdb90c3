"""Numerical certification of Moser isotopies on holomorphic coadjoint orbits."""

from .algebra import CartanData, MatrixLieAlgebra, build_algebra, cartan_data
from .pipeline import (
    ChamberError,
    DeltaError,
    inspect_model,
    run_lemma_suite,
    run_theorem_pipeline,
)
from .report import Scenario, load_scenario, render_report, scenario_from_config

__all__ = [
    "CartanData",
    "ChamberError",
    "DeltaError",
    "MatrixLieAlgebra",
    "Scenario",
    "build_algebra",
    "cartan_data",
    "inspect_model",
    "load_scenario",
    "render_report",
    "run_lemma_suite",
    "run_theorem_pipeline",
    "scenario_from_config",
]
