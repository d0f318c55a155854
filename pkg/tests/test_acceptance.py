"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the verdict lines.
"""

import json
import math
import random
import time

import httpx
import numpy as np

from maneuverforge.cli import main as cli_main
from maneuverforge.dynamics import (ControlInput, ForceBalance, VehicleParams,
                                    VehicleState, assemble_derivative,
                                    load_vehicle, step)
from maneuverforge.errors import Rejected
from maneuverforge.metrics import (CostWeights, TrialMetrics, angle_error,
                                   confidence_interval, cost, reward)
from maneuverforge.orchestrator import LoopConfig, run_loop
from maneuverforge.plan import (ManeuverPlan, ManeuverType, Phase,
                                compile_plan)
from maneuverforge.simulate import Trajectory, TrajectorySample, rollout
from maneuverforge.validation import ConstraintSet, enforce
from maneuverforge.world import (Obstacle, WorldModel, collision_check,
                                 corridor_world)

GRAVITY = 9.81
V_EPS = 0.5


def _verdict(num, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"[{status}] criterion {num:2d}: {name}{suffix}")
    assert ok, f"criterion {num} failed: {name}{suffix}"


# --- criterion 1 helpers ----------------------------------------------------

def _rhs_oracle(y, u, p):
    """Independent reimplementation of the model's right-hand side."""
    _, _, psi, vx, vy, w = y
    direction = -1.0 if u.reverse else 1.0
    sign_v = 1.0 if vx > 0 else (-1.0 if vx < 0 else 0.0)
    fx = (direction * u.throttle * p.max_drive_force
          - sign_v * u.brake * p.max_brake_force
          - p.drag_coeff * vx * abs(vx) - p.rolling_coeff * vx)
    steer = u.steering * p.max_steer_angle
    vref = max(abs(vx), V_EPS) * (1.0 if vx >= 0 else -1.0)
    fade = min(abs(vx) / V_EPS, 1.0)
    wheelbase = p.dist_front_axle + p.dist_rear_axle
    weight = p.friction_coeff * p.mass * GRAVITY / wheelbase
    cd, sd = math.cos(steer), math.sin(steer)
    vyf = vy + p.dist_front_axle * w
    af = math.atan2(-(vyf * cd - vref * sd), abs(vref * cd + vyf * sd))
    capf = weight * p.dist_rear_axle
    fyf = max(min(p.cornering_stiff_front * af, capf), -capf) * fade
    vyr = vy - p.dist_rear_axle * w
    ar = math.atan2(-vyr, abs(vref))
    capr = weight * p.dist_front_axle
    fyr = max(min(p.cornering_stiff_rear * ar, capr), -capr) * fade
    return (vx * math.cos(psi) - vy * math.sin(psi),
            vx * math.sin(psi) + vy * math.cos(psi),
            w,
            fx / p.mass - w * vy,
            (fyf * cd + fyr) / p.mass + w * vx,
            (p.dist_front_axle * fyf * cd - p.dist_rear_axle * fyr)
            / p.yaw_inertia)


def _euler_oracle(y, u, p, dt, n):
    for _ in range(n):
        d = _rhs_oracle(y, u, p)
        y = tuple(y[i] + dt * d[i] for i in range(6))
    return y


def _rk4_run(state, u, p, dt, n):
    for _ in range(n):
        state = step(state, u, p, dt)
    return (state.x_pos, state.y_pos, state.heading, state.v_long,
            state.v_lat, state.yaw_rate)


def _random_triple(rng):
    base = load_vehicle("sedan")
    params = VehicleParams(
        mass=base.mass * rng.uniform(0.8, 1.2),
        yaw_inertia=base.yaw_inertia * rng.uniform(0.8, 1.2),
        dist_front_axle=base.dist_front_axle * rng.uniform(0.9, 1.1),
        dist_rear_axle=base.dist_rear_axle * rng.uniform(0.9, 1.1),
        cornering_stiff_front=base.cornering_stiff_front * rng.uniform(0.8, 1.2),
        cornering_stiff_rear=base.cornering_stiff_rear * rng.uniform(0.8, 1.2),
        max_drive_force=base.max_drive_force * rng.uniform(0.8, 1.2),
        max_brake_force=base.max_brake_force * rng.uniform(0.8, 1.2),
        max_steer_angle=base.max_steer_angle,
        drag_coeff=base.drag_coeff, rolling_coeff=base.rolling_coeff,
        friction_coeff=base.friction_coeff, body_length=base.body_length,
        body_width=base.body_width)
    state = VehicleState(
        x_pos=rng.uniform(-5, 5), y_pos=rng.uniform(-5, 5),
        heading=rng.uniform(-math.pi, math.pi),
        v_long=rng.uniform(6.0, 15.0), v_lat=rng.uniform(-0.5, 0.5),
        yaw_rate=rng.uniform(-0.3, 0.3))
    control = ControlInput(throttle=rng.uniform(0, 1),
                           steering=rng.uniform(-0.4, 0.4),
                           brake=rng.uniform(0, 0.2), reverse=False)
    return state, control, params


def test_criterion_1_dynamics_oracle():
    started = time.perf_counter()
    rng = random.Random(20260809)
    worst = 0.0
    for _ in range(20):
        state, control, params = _random_triple(rng)
        y0 = (state.x_pos, state.y_pos, state.heading, state.v_long,
              state.v_lat, state.yaw_rate)
        ref = _euler_oracle(y0, control, params, 1e-5, 100000)
        got = _rk4_run(state, control, params, 0.01, 100)
        worst = max(worst, max(abs(a - b) for a, b in zip(ref, got)))

    # order of convergence over a decade of dt in a smooth (linear-tire)
    # regime; reference is a very fine RK4 run because the forward-Euler
    # oracle's own first-order error floor masks errors this small
    params = load_vehicle("sedan")
    state = VehicleState(v_long=15.0, v_lat=0.1, yaw_rate=0.05)
    control = ControlInput(throttle=0.3, steering=0.08)
    ref = _rk4_run(state, control, params, 1e-4, 10000)
    errors = []
    for dt, n in ((0.05, 20), (0.025, 40), (0.0125, 80)):
        got = _rk4_run(state, control, params, dt, n)
        errors.append(max(abs(a - b) for a, b in zip(ref, got)))
    ratios = [errors[i] / errors[i + 1] for i in range(len(errors) - 1)]
    elapsed = time.perf_counter() - started

    _verdict(1, "dynamics oracle",
             worst < 1e-3 and all(r >= 8.0 for r in ratios) and elapsed < 10.0,
             f"worst diff {worst:.2e}, ratios "
             f"{', '.join(f'{r:.1f}' for r in ratios)}, {elapsed:.1f}s")


def test_criterion_2_coupling_exactness():
    params = load_vehicle("sedan")
    rng = random.Random(2)
    ok = True
    for _ in range(200):
        state = VehicleState(v_long=rng.uniform(-20, 20),
                             v_lat=rng.uniform(-5, 5),
                             yaw_rate=rng.uniform(-3, 3))
        d = assemble_derivative(state, ForceBalance(0.0, 0.0, 0.0, 0.0),
                                params)
        ok = ok and d.accel_long == -(state.yaw_rate * state.v_lat)
        ok = ok and d.accel_lat == state.yaw_rate * state.v_long
    _verdict(2, "coupling exactness", ok, "200 states, bitwise equality")


def test_criterion_3_validator_compactness():
    started = time.perf_counter()
    rng = random.Random(31)
    constraints = ConstraintSet()
    violations = 0
    idempotence_breaks = 0
    outputs = 0
    for _ in range(10000):
        n = rng.randint(1, 10)
        plan = ManeuverPlan(ManeuverType.J_TURN, tuple(
            Phase(name=f"p{i}", duration=rng.uniform(0.1, 6.0),
                  throttle=rng.uniform(-5, 5), steering=rng.uniform(-5, 5),
                  brake=rng.uniform(-5, 5) if i < n - 1 else rng.uniform(0.05, 5),
                  reverse=rng.random() < 0.5)
            for i in range(n)))
        try:
            out = enforce(plan, constraints)
        except Rejected:
            try:
                enforce(plan, constraints)
                idempotence_breaks += 1  # second call must also reject
            except Rejected:
                pass
            continue
        outputs += 1
        for phase in out.phases:
            if not (0.0 <= phase.throttle <= 1.0
                    and -1.0 <= phase.steering <= 1.0
                    and 0.0 <= phase.brake <= 1.0
                    and 0.0 < phase.duration <= 30.0):
                violations += 1
        if enforce(out, constraints) != out:
            idempotence_breaks += 1
    elapsed = time.perf_counter() - started
    _verdict(3, "validator compactness",
             violations == 0 and idempotence_breaks == 0 and elapsed < 5.0
             and outputs > 1000,
             f"{outputs} repaired/accepted, {elapsed:.1f}s")


def test_criterion_4_cost_reward_identity():
    rng = random.Random(4)
    weights = CostWeights()
    worst = 0.0
    cases = []
    for _ in range(1000):
        cases.append((rng.uniform(0, 180), rng.random() < 0.5,
                      rng.uniform(0, 50)))
    cases += [(0.0, False, 0.0), (180.0, True, 50.0), (0.0, True, 0.0),
              (180.0, False, 50.0)]
    for err, collision, jerk in cases:
        m = TrialMetrics(err, err - 180.0, collision, jerk, jerk, 0.0, 0.0,
                         9.0, False)
        total = cost(m, weights) + reward(m, weights)
        worst = max(worst, abs(total - (180.0 * weights.alpha1
                                        + weights.alpha2)))
    _verdict(4, "cost/reward identity", worst <= 1e-9,
             f"worst deviation {worst:.2e} over {len(cases)} cases")


def _rotation_traj(total_deg, n=11):
    inc = math.radians(total_deg) / (n - 1)
    samples = tuple(
        TrajectorySample(i * 0.01, VehicleState(heading=i * inc, time=i * 0.01),
                         ControlInput())
        for i in range(n))
    return Trajectory(samples)


def test_criterion_5_angle_error_table():
    table = [
        (180.0, 0.0, 0.0), (-180.0, 0.0, 0.0),
        (170.0, -10.0, 10.0), (-170.0, -10.0, 10.0),
        (192.0, 12.0, 12.0), (-192.0, 12.0, 12.0),
        (90.0, -90.0, 90.0), (-90.0, -90.0, 90.0),
        (360.0, 180.0, 180.0), (0.0, -180.0, 180.0),
        (210.0, 30.0, 30.0), (-150.0, -30.0, 30.0),
    ]
    worst = 0.0
    for rotation, signed, absolute in table:
        got_signed, got_abs = angle_error(_rotation_traj(rotation))
        worst = max(worst, abs(got_signed - signed), abs(got_abs - absolute))
    _verdict(5, "angle-error correctness", worst <= 1e-9,
             f"12 rotations, worst {worst:.2e} deg")


def _perimeter_points(n):
    # fractional positions along a rectangle boundary, constant spacing
    return np.linspace(0.0, 4.0, n, endpoint=False)


def _rect_boundary(fractions, half_x, half_y):
    side = np.floor(fractions).astype(int)
    f = fractions - side
    x = np.empty_like(fractions)
    y = np.empty_like(fractions)
    x[side == 0] = -half_x + 2 * half_x * f[side == 0]
    y[side == 0] = -half_y
    x[side == 1] = half_x
    y[side == 1] = -half_y + 2 * half_y * f[side == 1]
    x[side == 2] = half_x - 2 * half_x * f[side == 2]
    y[side == 2] = half_y
    x[side == 3] = -half_x
    y[side == 3] = half_y - 2 * half_y * f[side == 3]
    return x, y


def _sampled_overlap(state, params, box, n_points=10000):
    hl, hw = params.body_length / 2.0, params.body_width / 2.0
    c, s = math.cos(state.heading), math.sin(state.heading)
    half = n_points // 2

    bx, by = _rect_boundary(_perimeter_points(half), hl, hw)
    wx = state.x_pos + bx * c - by * s
    wy = state.y_pos + bx * s + by * c
    if np.any((wx >= box.x_min) & (wx <= box.x_max)
              & (wy >= box.y_min) & (wy <= box.y_max)):
        return True

    ox, oy = _rect_boundary(_perimeter_points(half),
                            (box.x_max - box.x_min) / 2.0,
                            (box.y_max - box.y_min) / 2.0)
    ox = ox + (box.x_min + box.x_max) / 2.0
    oy = oy + (box.y_min + box.y_max) / 2.0
    rx = ox - state.x_pos
    ry = oy - state.y_pos
    fx = rx * c + ry * s
    fy = -rx * s + ry * c
    return bool(np.any((np.abs(fx) <= hl) & (np.abs(fy) <= hw)))


def _near_contact(state, params, box, margin=0.02):
    """True when growing/shrinking the footprint by ``margin`` flips SAT."""
    def check(delta):
        grown = VehicleParams(
            mass=params.mass, yaw_inertia=params.yaw_inertia,
            dist_front_axle=params.dist_front_axle,
            dist_rear_axle=params.dist_rear_axle,
            cornering_stiff_front=params.cornering_stiff_front,
            cornering_stiff_rear=params.cornering_stiff_rear,
            max_drive_force=params.max_drive_force,
            max_brake_force=params.max_brake_force,
            max_steer_angle=params.max_steer_angle,
            drag_coeff=params.drag_coeff, rolling_coeff=params.rolling_coeff,
            friction_coeff=params.friction_coeff,
            body_length=params.body_length + 2 * delta,
            body_width=params.body_width + 2 * delta)
        return collision_check(state, grown, WorldModel("w", (box,)))
    return check(margin) and not check(-margin)


def test_criterion_6_collision_oracle():
    started = time.perf_counter()
    params = load_vehicle("sedan")
    rng = random.Random(6)
    disagreements_outside_band = 0
    contact_band = 0
    for _ in range(1000):
        state = VehicleState(x_pos=rng.uniform(-6, 6),
                             y_pos=rng.uniform(-6, 6),
                             heading=rng.uniform(-math.pi, math.pi))
        cx, cy = rng.uniform(-6, 6), rng.uniform(-6, 6)
        sx, sy = rng.uniform(0.3, 4.0), rng.uniform(0.3, 4.0)
        box = Obstacle(cx - sx, cx + sx, cy - sy, cy + sy)
        sat = collision_check(state, params, WorldModel("w", (box,)))
        sampled = _sampled_overlap(state, params, box)
        if sat != sampled:
            if _near_contact(state, params, box):
                contact_band += 1
            else:
                disagreements_outside_band += 1
    elapsed = time.perf_counter() - started
    _verdict(6, "collision oracle",
             disagreements_outside_band == 0 and elapsed < 30.0,
             f"1000 pairs, {contact_band} contact-band cases, {elapsed:.1f}s")


def test_criterion_7_closed_loop_convergence():
    started = time.perf_counter()
    details = []
    ok = True
    for vehicle, target in (("sedan", 3.0), ("sports_coupe", 10.0)):
        result = run_loop(LoopConfig(vehicle=vehicle, epsilon=0.0, k_max=30))
        errors = [r.metrics.angle_error for r in result.records
                  if r.metrics is not None]
        reached = [i for i, e in enumerate(errors) if e <= target]
        if not reached:
            ok = False
            details.append(f"{vehicle}: never reached {target}")
            continue
        first = reached[0]
        strictly_decreasing = all(errors[i + 1] < errors[i]
                                  for i in range(first))
        ok = ok and strictly_decreasing and first < 30
        details.append(f"{vehicle}: {first + 1} iters, "
                       f"errors {[round(e, 2) for e in errors[:first + 1]]}")
    elapsed = time.perf_counter() - started
    ok = ok and elapsed < 60.0
    _verdict(7, "closed-loop convergence", ok,
             "; ".join(details) + f", {elapsed:.1f}s")


def test_criterion_8_jturn_feasibility():
    result = run_loop(LoopConfig(vehicle="sedan", epsilon=3.0, k_max=30))
    plan = result.best_plan
    params = load_vehicle("sedan")
    traj = rollout(VehicleState(), compile_plan(plan), params, 0.01,
                   corridor_world())
    rotation = math.degrees(traj.samples[-1].state.heading
                            - traj.samples[0].state.heading)
    duration = sum(p.duration for p in plan.phases)
    ok = (not traj.collision and abs(abs(rotation) - 180.0) <= 10.0
          and duration <= 20.0)
    _verdict(8, "J-turn feasibility in corridor", ok,
             f"rotation {rotation:.1f} deg, duration {duration:.1f}s, "
             f"collision {traj.collision}")


def test_criterion_9_batch_reproducibility(tmp_path):
    started = time.perf_counter()
    config_doc = {"backend": "scripted", "k_max": 30, "epsilon": 3.0,
                  "seed": 11}
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config_doc))

    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        code = cli_main(["batch", "--config", str(config_path),
                         "--trials", "100", "--batch-size", "20",
                         "--jobs", "1", "--out", str(out)])
        assert code == 0
        outs.append(out)

    learning = (outs[0] / "learning_progress.csv").read_text().splitlines()
    five_rows = len(learning) == 6  # header + 5 batches
    tables_exist = all((outs[0] / n).exists() for n in
                       ("table_parameter_execution.txt", "table_metrics.txt",
                        "batch_report.json", "velocity_ci.csv"))
    identical = all(
        (outs[0] / n).read_bytes() == (outs[1] / n).read_bytes()
        for n in ("batch_report.json", "learning_progress.csv",
                  "velocity_ci.csv", "table_parameter_execution.txt",
                  "table_metrics.txt"))

    def strip_wall(path):
        lines = (path / "iterations.csv").read_text().splitlines()
        return [",".join(line.split(",")[:-1]) for line in lines]

    iterations_match = strip_wall(outs[0]) == strip_wall(outs[1])
    elapsed = time.perf_counter() - started
    _verdict(9, "batch reproducibility and report shape",
             five_rows and tables_exist and identical and iterations_match
             and elapsed < 300.0,
             f"5-row progress CSV {five_rows}, identical {identical}, "
             f"{elapsed:.1f}s")


def test_criterion_10_ci_formula():
    value = confidence_interval([-2.0, -2.0, 2.0, 2.0])
    _verdict(10, "confidence-interval formula", value == 1.96,
             f"n=4, sigma=2 -> {value!r}")


def test_criterion_11_replay_fidelity(tmp_path, monkeypatch):
    fixture = tmp_path / "fixture.jsonl"
    config_doc = {"backend": "scripted", "k_max": 30, "epsilon": 3.0,
                  "record_path": str(fixture)}
    config_path = tmp_path / "config.json"
    config_path.write_text(json.dumps(config_doc))

    out_record = tmp_path / "recorded"
    assert cli_main(["run", "--config", str(config_path),
                     "--out", str(out_record)]) == 0

    # replaying must never touch the network: instantiating an HTTP client
    # at all is a failure
    calls = []

    def forbidden_client(*args, **kwargs):
        calls.append(1)
        raise AssertionError("network client constructed during replay")

    monkeypatch.setattr(httpx, "Client", forbidden_client)

    out_replay = tmp_path / "replayed"
    code = cli_main(["replay", str(fixture), "--config", str(config_path),
                     "--out", str(out_replay)])
    identical = ((out_record / "run_result.json").read_bytes()
                 == (out_replay / "run_result.json").read_bytes())

    recorded = json.loads((out_record / "run_result.json").read_text())
    replayed = json.loads((out_replay / "run_result.json").read_text())
    plans_match = recorded["best_plan"] == replayed["best_plan"]
    metrics_match = recorded["best_metrics"] == replayed["best_metrics"]

    _verdict(11, "replay fidelity", code == 0 and identical and plans_match
             and metrics_match and not calls,
             f"exit {code}, byte-identical {identical}, network calls "
             f"{len(calls)}")
