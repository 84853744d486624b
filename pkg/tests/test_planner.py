import pytest

from guardkit import bench
from guardkit.bridge import ScriptedBackend
from guardkit.core import InvalidValueError, RequestKind
from guardkit.planner import ActionPlan, PlanError, parse_plan, plan


GOOD_PLAN = (
    "Step 1: Summarize the guard requests.\n"
    "Step 2: Identify the role from the input.\n"
    "Step 3: Extract the required resources from the output log.\n"
    "Step 4: Generate guardrail code and run the internal interpreter.\n"
)


class TestActionPlan:
    def test_requires_exactly_four_nonempty_steps(self):
        with pytest.raises(InvalidValueError):
            ActionPlan(steps=("a", "b", "c"))
        with pytest.raises(InvalidValueError):
            ActionPlan(steps=("a", "b", "  ", "d"))

    def test_render_format(self):
        p = ActionPlan(steps=("a", "b", "c", "d"))
        assert p.render() == "Step 1: a\nStep 2: b\nStep 3: c\nStep 4: d"

    def test_roundtrip(self):
        p = ActionPlan(steps=("a", "b", "c", "d"))
        assert ActionPlan.from_dict(p.to_dict()) == p


class TestParsePlan:
    def test_clean_format(self):
        p = parse_plan(GOOD_PLAN)
        assert p.steps[0] == "Summarize the guard requests."
        assert p.steps[3].startswith("Generate guardrail code")

    def test_tolerates_decoration_and_case(self):
        text = (
            "Sure, here is the plan:\n"
            "  1. step 1: first thing\n"
            "- STEP 2 - second thing\n"
            "# Step 3: third thing\n"
            "> Step 4) fourth thing\n"
        )
        p = parse_plan(text)
        assert p.steps == ("first thing", "second thing", "third thing", "fourth thing")

    def test_missing_marker_reports_found_numbers(self):
        text = "Step 1: a\nStep 2: b\nStep 4: d\n"
        with pytest.raises(PlanError, match=r"\[1, 2, 4\]"):
            parse_plan(text)

    def test_out_of_order_rejected(self):
        with pytest.raises(PlanError):
            parse_plan("Step 2: b\nStep 1: a\nStep 3: c\nStep 4: d")

    def test_no_markers_rejected(self):
        with pytest.raises(PlanError, match="none"):
            parse_plan("I will check the permissions and then decide.")

    def test_empty_step_rejected(self):
        with pytest.raises(PlanError):
            parse_plan("Step 1: a\nStep 2:\nStep 3: c\nStep 4: d")


class TestPlanGeneration:
    def _inputs(self, table):
        case = bench.generate_eicu_suite(table, seed=5)[0]
        req = bench.default_access_request(table)
        spec = bench.default_target_spec(RequestKind.ACCESS_CONTROL)
        demos = bench.default_demonstrations(RequestKind.ACCESS_CONTROL, table=table)
        return case.agent_io, spec, req, demos

    def test_good_first_response(self, table):
        io, spec, req, demos = self._inputs(table)
        backend = ScriptedBackend(queue=[GOOD_PLAN])
        p = plan(io, spec, req, demos, backend)
        assert len(backend.prompts_seen) == 1
        assert p.steps[0] == "Summarize the guard requests."

    def test_single_reask_on_bad_format(self, table):
        io, spec, req, demos = self._inputs(table)
        backend = ScriptedBackend(queue=["no steps here at all", GOOD_PLAN])
        p = plan(io, spec, req, demos, backend)
        assert len(backend.prompts_seen) == 2
        assert "could not be parsed" in backend.prompts_seen[1]
        assert p.steps[3].startswith("Generate guardrail code")

    def test_two_bad_responses_surface_error(self, table):
        io, spec, req, demos = self._inputs(table)
        backend = ScriptedBackend(queue=["bad", "still bad"])
        with pytest.raises(PlanError):
            plan(io, spec, req, demos, backend)
        assert len(backend.prompts_seen) == 2
