"""Planar arm + hammer + nail simulator."""

from .config import ConfigError, SimConfig
from .env import (
    OBS_DIM,
    BatchEnv,
    ContactEvent,
    ContractError,
    Observation,
    SimState,
    Termination,
    check_termination,
    observe,
    pd_torque,
    reset,
    step,
    write_trajectory_csv,
)
from .kinematics import Keypoints, forward_kinematics, keypoint_jacobians, solve_ik, tool_angle

__all__ = [
    "OBS_DIM",
    "BatchEnv",
    "ConfigError",
    "ContactEvent",
    "ContractError",
    "Keypoints",
    "Observation",
    "SimConfig",
    "SimState",
    "Termination",
    "check_termination",
    "forward_kinematics",
    "keypoint_jacobians",
    "observe",
    "pd_torque",
    "reset",
    "solve_ik",
    "step",
    "tool_angle",
    "write_trajectory_csv",
]
