import json

import numpy as np
import pytest
from src.obslab.errors import InvalidTable, ProblemFormatError
from src.obslab.services.characteristic import CharContext
from src.obslab.services.cochains import Cochain, coboundary
from src.obslab.services.groups import NormalSubgroup, cyclic
from src.obslab.services.modules import AbelianModule, FlowModule
from src.obslab.types import CharacteristicSpec, ModuleSpec, ProblemSpec
from src.obslab.utilities import (
    build_chi,
    build_flow,
    build_group,
    compute_digest,
    load_problem,
    make_report,
    parse_group,
    parse_module,
    render_report,
    replay_witness,
    witness_record,
)

FX1_PROBLEM = {
    "group": {"family": "cyclic", "n": 4},
    "module": {"moduli": [2]},
    "L": [0, 2],
    "chi": {"lamH": [{"args": [2, 1], "value": [1]}, {"args": [2, 3], "value": [1]}]},
}


class TestParsing:
    def test_families(self):
        assert parse_group("cyclic:4").n == 4
        assert parse_group("heisenberg:3").family == "heisenberg"
        assert [f.n for f in parse_group("klein").factors] == [2, 2]
        assert [f.n for f in parse_group("product:2x3").factors] == [2, 3]

    def test_table(self):
        spec = parse_group("[[0, 1], [1, 0]]")
        assert spec.family == "table"
        assert build_group(spec).order == 2

    def test_bad_table_is_rejected_when_built(self):
        spec = parse_group("[[0, 1, 2], [1, 0, 0], [2, 2, 1]]")
        with pytest.raises(InvalidTable):
            build_group(spec)

    @pytest.mark.parametrize("text", ["dihedral:4", "cyclic:x", "cyclic:0", "[[0, 1]"])
    def test_unknown_group(self, text):
        with pytest.raises(ProblemFormatError):
            parse_group(text)

    def test_modules(self):
        assert parse_module("Z2+Z4").moduli == [2, 4]
        assert parse_module("2,4").moduli == [2, 4]
        assert parse_module("z3").moduli == [3]

    def test_bad_module(self):
        with pytest.raises(ProblemFormatError):
            parse_module("Zx")


class TestLoadProblem:
    def test_valid(self, tmp_path):
        path = tmp_path / "fx1.json"
        path.write_text(json.dumps(FX1_PROBLEM))
        problem = load_problem(str(path))
        assert problem.L == [0, 2]

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_problem(str(tmp_path / "missing.json"))

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text('{"group": {"family": "cyclic",\n "n": }}')
        with pytest.raises(ProblemFormatError, match="line 2"):
            load_problem(str(path))

    def test_bad_field(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"group": {"family": "cyclic"}, "module": {"moduli": [2]}}))
        with pytest.raises(ProblemFormatError, match="group"):
            load_problem(str(path))


class TestBuilders:
    def test_flow_from_generators(self):
        flow = build_flow(ModuleSpec(moduli=[3], action_generators={1: [[2]]}), cyclic(2))
        assert flow.action.auts.tolist() == [[[1]], [[2]]]
        assert flow.theta.is_identity()

    def test_chi_keyed_by_elements(self):
        problem = ProblemSpec(**FX1_PROBLEM)
        H = build_group(problem.group)
        flow = build_flow(problem.module, H)
        ctx = CharContext.build(flow, NormalSubgroup.build(H, problem.L))
        chi = build_chi(problem.chi, ctx)
        assert chi.lamH_value(2, 1).tolist() == [1]
        assert chi.lamH_value(2, 2).tolist() == [0]

    def test_chi_element_outside_L(self):
        H = cyclic(4)
        ctx = CharContext.build(FlowModule.trivial(H, AbelianModule.cyclic(2)), NormalSubgroup.build(H, [0, 2]))
        spec = CharacteristicSpec(lamT=[{"args": [1], "value": [1]}])
        with pytest.raises(ProblemFormatError, match="not in L"):
            build_chi(spec, ctx)


class TestReports:
    def test_digest_ignores_key_order(self):
        assert compute_digest({"a": 1, "b": [1, 2]}) == compute_digest({"b": [1, 2], "a": 1})
        assert compute_digest({"a": 1}) != compute_digest({"a": 2})

    def test_digest_accepts_numpy(self):
        assert compute_digest({"a": np.array([1, 2])}) == compute_digest({"a": [1, 2]})

    def test_make_report_drops_missing_arguments(self):
        report = make_report("heisenberg", {"k": 2, "modulus": None}, {"splitting": "OBSTRUCTED"})
        assert report.arguments == {"k": 2}
        assert report.verdict.ok
        assert report.exit_code == 0

    def test_render_text(self):
        report = make_report("heisenberg", {"k": 2}, {"splitting": "OBSTRUCTED", "necessary": False})
        text = render_report(report, "text")
        assert "command: heisenberg" in text
        assert "splitting: OBSTRUCTED" in text
        assert "verdict: ok" in text
        assert text.endswith("witnesses: 0")

    def test_render_violation(self):
        report = make_report("fiber-check", {}, {"fiber": False}, verdict_ok=False, axiom="fiber",
                             witness={"q": 1}, detail="fiber condition fails", exit_code=1)
        text = render_report(report, "text")
        assert "verdict: violation" in text
        assert "axiom: fiber" in text
        assert 'witness: {"q": 1}' in text

    def test_render_json(self):
        report = make_report("heisenberg", {"k": 2}, {"splitting": "SPLIT"})
        data = json.loads(render_report(report, "json"))
        assert data["results"]["splitting"] == "SPLIT"
        assert data["digest"] == report.digest


class TestReplay:
    def test_coboundary_witness(self):
        flow = FlowModule.trivial(cyclic(4), AbelianModule.cyclic(2))
        b = Cochain.from_entries(1, flow, {(1,): [1]})
        record = witness_record("coboundary", [coboundary(b)], [b])
        assert replay_witness(record)

    def test_tampered_witness(self):
        flow = FlowModule.trivial(cyclic(4), AbelianModule.cyclic(2))
        b = Cochain.from_entries(1, flow, {(1,): [1]})
        record = witness_record("coboundary", [coboundary(b)], [Cochain.zero(1, flow)])
        assert not replay_witness(record)
