"""End-to-end latency harness.

Measures the full path a real operator exercises: WebSocket ingest ->
bus -> planner -> bridge -> (wire) -> simulated arm -> feedback, by
injecting a step change in the phone pose and timestamping the first
feedback sample displaced more than epsilon from the pre-step pose.

For a first-order lag with time constant tau responding to a step of
amplitude A, the displacement crosses epsilon at

    t_cross = -tau * ln(1 - epsilon / A)

so the expected end-to-end figure is transport delay + t_cross, plus
bounded quantization from the periodic planner/bridge/feedback loops.
``expected_band`` returns that closed-form envelope; measurements are
judged against it rather than against any particular hardware's number.
"""

from __future__ import annotations

import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Optional

from websockets.sync.client import connect

from . import topics
from .bus import QosProfile
from .clock import s_to_ns
from .messages import RobotState
from .pipeline import Pipeline
from .simarm import SimArmConfig


@dataclass(frozen=True)
class LatencyTrial:
    injection_ns: int
    first_motion_ns: Optional[int]
    failed: bool = False
    reason: str = ""

    @property
    def end_to_end_ms(self) -> Optional[float]:
        if self.failed or self.first_motion_ns is None:
            return None
        return (self.first_motion_ns - self.injection_ns) / 1e6


@dataclass
class LatencyReport:
    epsilon_m: float
    step_m: float
    trials: list[LatencyTrial] = field(default_factory=list)

    @property
    def succeeded(self) -> list[LatencyTrial]:
        return [t for t in self.trials if not t.failed]

    @property
    def failed_count(self) -> int:
        return len(self.trials) - len(self.succeeded)

    @property
    def min_ms(self) -> float:
        return min(t.end_to_end_ms for t in self.succeeded)

    @property
    def mean_ms(self) -> float:
        return statistics.fmean(t.end_to_end_ms for t in self.succeeded)

    @property
    def max_ms(self) -> float:
        return max(t.end_to_end_ms for t in self.succeeded)

    def summary(self) -> str:
        if not self.succeeded:
            return f"all {len(self.trials)} trials failed"
        return (
            f"{len(self.succeeded)}/{len(self.trials)} trials ok | "
            f"end-to-end min {self.min_ms:.1f} ms, mean {self.mean_ms:.1f} ms, "
            f"max {self.max_ms:.1f} ms (epsilon {self.epsilon_m * 1e3:.1f} mm, "
            f"step {self.step_m * 1e3:.1f} mm)"
        )


def crossing_time_s(sim: SimArmConfig, epsilon_m: float, step_m: float) -> float:
    """Time for the lag model's displacement to exceed epsilon after a step."""
    if epsilon_m >= step_m:
        return math.inf
    if sim.lag_time_constant == 0:
        return 0.0
    # The speed cap turns the initial response linear; account for the
    # regime boundary so fine-grained profiles stay analytic.
    tau = sim.lag_time_constant
    linear_rate = sim.max_cartesian_speed
    exp_initial_rate = step_m / tau
    if exp_initial_rate <= linear_rate:
        return -tau * math.log(1.0 - epsilon_m / step_m)
    # capped: displacement grows at linear_rate until the exponential
    # rate falls under the cap, which for epsilon small happens after
    # crossing in practice; treat the early segment as linear.
    t_linear = epsilon_m / linear_rate
    remaining = (step_m / tau) * math.exp(-t_linear / tau)
    if remaining <= linear_rate:
        return t_linear  # already in the exponential regime border; good enough
    return t_linear


def expected_band(
    sim: SimArmConfig,
    epsilon_m: float,
    step_m: float,
    planner_period_s: float,
    margin: float = 0.10,
) -> tuple[float, float]:
    """[lo, hi] seconds the measured end-to-end mean must fall inside.

    Lower edge: transport delay + analytic crossing time.  Upper edge
    additionally allows one period of each quantized stage (planner
    pump, bridge pump, feedback sampling, integration micro-step).  The
    band is then widened by ``margin`` on both sides.
    """
    t_cross = crossing_time_s(sim, epsilon_m, step_m)
    lo = sim.transport_delay + t_cross
    hi = (
        lo
        + planner_period_s
        + 2.0 / sim.feedback_rate  # bridge pump + feedback sampling
        + sim.integration_step
    )
    return lo * (1.0 - margin), hi * (1.0 + margin)


def measure_latency(
    pipeline: Pipeline,
    namespace: str = "",
    trials: int = 20,
    epsilon_m: float = 0.002,
    step_m: float = 0.02,
    timeout_s: float = 5.0,
    settle_tolerance_m: float = 1e-4,
) -> LatencyReport:
    """Run step-injection trials against a started pipeline.

    Uses the gateway's real WebSocket interface.  Trials alternate step
    direction so the workspace is never walked off; between trials the
    clutch is engaged and the arm is allowed to settle onto its last
    target, so each trial starts from rest.
    """
    report = LatencyReport(epsilon_m=epsilon_m, step_m=step_m)
    bus = pipeline.bus
    clock = pipeline.clock
    pose_topic = topics.namespaced(namespace, topics.PHONE_POSE)
    button_topic = topics.namespaced(namespace, topics.BUTTON)
    feedback_topic = topics.namespaced(namespace, topics.ROBOT_FEEDBACK)
    target_topic = topics.namespaced(namespace, topics.TARGET_POSE)
    fb_sub = bus.subscribe(feedback_topic, QosProfile(depth=256))

    def wire(topic: str) -> str:
        return topic if topic.startswith("/") else "/" + topic

    probe_period_s = 1.0 / pipeline.unit(namespace).profile.sim.feedback_rate

    try:
        with connect(pipeline.gateway_url, close_timeout=1.0) as ws:
            stamp_box = [0.0]
            phone = [0.0, 0.0, 0.0]

            def send(topic: str, msg: dict) -> None:
                expected = bus.sequence(topic) + 1
                ws.send(json.dumps({"op": "publish", "topic": wire(topic), "msg": msg}))
                if not bus.wait_for_publish(topic, expected, timeout_s=5.0):
                    raise TimeoutError(f"gateway did not republish on {topic}")

            def send_pose() -> None:
                stamp_box[0] += 1.0
                send(
                    pose_topic,
                    {
                        "header": {"stamp": stamp_box[0]},
                        "pose": {
                            "position": {"x": phone[0], "y": phone[1], "z": phone[2]},
                            "orientation": {"w": 1.0, "x": 0.0, "y": 0.0, "z": 0.0},
                        },
                    },
                )

            def toggle_clutch() -> None:
                stamp_box[0] += 1.0
                send(button_topic, {"button": "volume_up", "stamp": stamp_box[0]})

            for topic in (pose_topic, button_topic):
                ws.send(json.dumps({"op": "advertise", "topic": wire(topic)}))

            # warm-up: feedback must exist before a clutch release is legal
            pipeline.run_for(3.0 * probe_period_s)
            send_pose()
            pipeline.run_for(0.02)

            direction = 1.0
            for _ in range(trials):
                toggle_clutch()  # release (first iteration) / re-release
                pipeline.run_for(0.02)
                fb_sub.drain()

                base_env = bus.latest(feedback_topic)
                assert base_env is not None
                base: RobotState = base_env.payload
                p0 = base.ee_position

                phone[0] += direction * step_m
                direction = -direction
                injection_ns = clock.now_ns()
                send_pose()

                first_motion: Optional[int] = None
                deadline_ns = injection_ns + s_to_ns(timeout_s)
                while clock.now_ns() < deadline_ns and first_motion is None:
                    pipeline.run_for(probe_period_s)
                    for env in fb_sub.drain():
                        state: RobotState = env.payload
                        if state.ee_position.distance_to(p0) > epsilon_m:
                            first_motion = state.stamp_ns
                            break
                if first_motion is None:
                    report.trials.append(
                        LatencyTrial(
                            injection_ns=injection_ns,
                            first_motion_ns=None,
                            failed=True,
                            reason=f"no displacement > {epsilon_m} m within {timeout_s} s",
                        )
                    )
                else:
                    report.trials.append(
                        LatencyTrial(injection_ns=injection_ns, first_motion_ns=first_motion)
                    )

                # engage the clutch and let the arm finish converging so
                # the next trial starts from rest
                toggle_clutch()
                target_env = bus.latest(target_topic)
                if target_env is not None:
                    settle_deadline = clock.now_ns() + s_to_ns(
                        20.0 * max(pipeline.unit(namespace).profile.sim.lag_time_constant, 0.05)
                    )
                    while clock.now_ns() < settle_deadline:
                        pipeline.run_for(5.0 * probe_period_s)
                        env = bus.latest(feedback_topic)
                        if (
                            env is not None
                            and env.payload.ee_position.distance_to(
                                target_env.payload.position
                            )
                            < settle_tolerance_m
                        ):
                            break
                fb_sub.drain()
    finally:
        bus.unsubscribe(fb_sub)
    return report
