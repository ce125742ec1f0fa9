"""Scenarios, simulation loop, metrics and Monte Carlo checks."""

from .engine import RunResult, World, iter_run, run
from .generators import gen_antipodal_circle, gen_asymmetric_swap, gen_random_moving
from .metrics import Metrics, MetricsAccumulator, StepRecord, metrics_from_records
from .scenario import (
    DeadlockParams,
    EstimationParams,
    KFParams,
    MPCParams,
    ObstacleSpec,
    RobotSpec,
    Scenario,
    ScenarioError,
    validate,
)
