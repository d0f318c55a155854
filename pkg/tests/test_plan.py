import json

import pytest
from hypothesis import given, strategies as st

from maneuverforge.dynamics import ControlInput
from maneuverforge.errors import MalformedPlan, OutOfRange
from maneuverforge.plan import (MANEUVER_PLAN_SCHEMA, ControlSchedule,
                                ManeuverPlan, ManeuverType, Phase, Segment,
                                compile_plan, control_at, jturn_template,
                                plan_from_dict, plan_from_json)
from maneuverforge.validation import ConstraintSet, Verdict, validate


class TestTemplate:
    def test_five_phases_reverse_first_brake_last(self):
        plan = jturn_template()
        assert len(plan.phases) == 5
        assert plan.phases[0].reverse is True
        assert plan.phases[-1].brake > 0.0

    def test_template_is_self_consistent(self):
        report = validate(jturn_template(), ConstraintSet())
        assert report.verdict is Verdict.ACCEPTED

    def test_counter_steer_opposes_spin_steer(self):
        plan = jturn_template()
        assert plan.phases[1].steering * plan.phases[2].steering < 0.0

    def test_roundtrips_through_json(self):
        plan = jturn_template()
        assert plan_from_json(plan.to_json()) == plan


class TestCompile:
    def test_five_unit_phases(self):
        plan = ManeuverPlan(ManeuverType.J_TURN, tuple(
            Phase(f"p{i}", 1.0, throttle=0.1 * i) for i in range(5)))
        schedule = compile_plan(plan)
        assert len(schedule.segments) == 5
        assert schedule.total_duration == pytest.approx(5.0)

    def test_single_phase(self):
        schedule = compile_plan(ManeuverPlan(
            ManeuverType.J_TURN, (Phase("only", 2.0),)))
        assert len(schedule.segments) == 1
        assert schedule.segments[0].start_time == 0.0
        assert schedule.segments[0].end_time == 2.0

    def test_zero_duration_phase_rejected(self):
        with pytest.raises(MalformedPlan):
            compile_plan(ManeuverPlan(ManeuverType.J_TURN,
                                      (Phase("bad", 0.0),)))

    def test_too_many_phases_rejected(self):
        plan = ManeuverPlan(ManeuverType.J_TURN, tuple(
            Phase(f"p{i}", 1.0) for i in range(11)))
        with pytest.raises(MalformedPlan):
            compile_plan(plan)

    def test_controls_are_clamped(self):
        plan = ManeuverPlan(ManeuverType.J_TURN,
                            (Phase("hot", 1.0, throttle=1.4, steering=-1.2),))
        schedule = compile_plan(plan)
        assert schedule.segments[0].control == ControlInput(1.0, -1.0, 0.0,
                                                            False)

    @given(st.lists(st.floats(min_value=0.01, max_value=30.0), min_size=1,
                    max_size=10))
    def test_durations_sum_to_end_time(self, durations):
        total = sum(durations)
        if total > 60.0:
            return
        plan = ManeuverPlan(ManeuverType.J_TURN, tuple(
            Phase(f"p{i}", d) for i, d in enumerate(durations)))
        schedule = compile_plan(plan)
        # same left-to-right accumulation as sum(): bitwise equal
        assert schedule.total_duration == total
        # contiguity: each segment starts where the previous one ended
        for a, b in zip(schedule.segments, schedule.segments[1:]):
            assert a.end_time == b.start_time


class TestControlAt:
    def make(self):
        a = ControlInput(throttle=0.2)
        b = ControlInput(throttle=0.8)
        return ControlSchedule((Segment(0.0, 1.0, a), Segment(1.0, 2.0, b)))

    def test_mid_segment(self):
        schedule = self.make()
        assert control_at(schedule, 0.5).throttle == 0.2

    def test_boundary_belongs_to_next_segment(self):
        schedule = self.make()
        assert control_at(schedule, 1.0).throttle == 0.8

    def test_final_instant_belongs_to_last_segment(self):
        schedule = self.make()
        assert control_at(schedule, 2.0).throttle == 0.8

    def test_out_of_range(self):
        schedule = self.make()
        with pytest.raises(OutOfRange):
            control_at(schedule, -0.1)
        with pytest.raises(OutOfRange):
            control_at(schedule, 2.1)

    def test_piecewise_constant_within_segment(self):
        schedule = compile_plan(jturn_template())
        for seg in schedule.segments:
            span = seg.end_time - seg.start_time
            for frac in (0.0, 0.25, 0.5, 0.99):
                t = seg.start_time + frac * span
                assert control_at(schedule, t) == seg.control


class TestPlanParsing:
    def test_unknown_plan_key(self):
        doc = jturn_template().to_dict()
        doc["speed"] = 3
        with pytest.raises(MalformedPlan):
            plan_from_dict(doc)

    def test_unknown_phase_key(self):
        doc = jturn_template().to_dict()
        doc["phases"][0]["boost"] = True
        with pytest.raises(MalformedPlan):
            plan_from_dict(doc)

    def test_missing_phase_key(self):
        doc = jturn_template().to_dict()
        del doc["phases"][0]["brake"]
        with pytest.raises(MalformedPlan):
            plan_from_dict(doc)

    def test_wrong_types(self):
        doc = jturn_template().to_dict()
        doc["phases"][0]["reverse"] = "yes"
        with pytest.raises(MalformedPlan):
            plan_from_dict(doc)

    def test_bad_maneuver_type(self):
        doc = jturn_template().to_dict()
        doc["maneuver_type"] = "powerslide"
        with pytest.raises(MalformedPlan):
            plan_from_dict(doc)

    def test_invalid_json_text(self):
        with pytest.raises(MalformedPlan):
            plan_from_json("{not json")

    def test_schema_matches_template_document(self):
        import jsonschema
        jsonschema.validate(jturn_template().to_dict(), MANEUVER_PLAN_SCHEMA)

    def test_serialized_shape(self):
        doc = json.loads(jturn_template().to_json())
        assert set(doc) == {"maneuver_type", "phases", "metadata"}
        assert set(doc["phases"][0]) == {"name", "duration", "throttle",
                                         "steering", "brake", "reverse"}
