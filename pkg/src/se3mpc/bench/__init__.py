from .reference import UnknownSpec, generate_reference
from .runner import TrialResult, error_scale_sweep, run_scenario, run_trial
from .sampling import sample_initial_poses
from .scenario import Scenario, ScenarioError, bundled_scenarios, load_bundled, load_scenario

__all__ = [
    "Scenario",
    "ScenarioError",
    "TrialResult",
    "UnknownSpec",
    "bundled_scenarios",
    "error_scale_sweep",
    "generate_reference",
    "load_bundled",
    "load_scenario",
    "run_scenario",
    "run_trial",
    "sample_initial_poses",
]
