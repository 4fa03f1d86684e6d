"""Canonical topic bases used across the pipeline.

One arm's full pipeline lives under a single namespace prefix
(``""`` for single-arm, ``/left`` / ``/right`` for bimanual), which is
what keeps dual-arm streams isolated while running identical code.
"""

from __future__ import annotations

from .bus import TopicName

PHONE_POSE = "teleop/phone_pose"
BUTTON = "teleop/button"
TARGET_POSE = "teleop/target_pose"
GRIPPER_CMD = "teleop/gripper_cmd"
ROBOT_FEEDBACK = "teleop/robot_feedback"
PLANNER_STATE = "teleop/planner_state"
RECORD_CTL = "teleop/record_ctl"
RECORD_STATUS = "teleop/record_status"
BRIDGE_HEALTH = "teleop/bridge_health"
SAFETY_HOLD = "teleop/safety_hold"

BASE_PREFIX = "teleop/"


def camera(source_name: str) -> str:
    return f"teleop/{source_name}"


def namespaced(namespace: str, base: str) -> str:
    return TopicName(namespace=namespace, base=base).full
