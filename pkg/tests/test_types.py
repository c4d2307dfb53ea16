import pytest
from pydantic import ValidationError
from src.obslab.types import (
    CochainSpec,
    GroupSpec,
    ModuleSpec,
    ObstructionSpec,
    ProblemSpec,
    Report,
    Verdict,
)


class TestGroupSpec:
    def test_cyclic(self):
        spec = GroupSpec(family="cyclic", n=4)
        assert spec.n == 4
        assert spec.factors == []

    def test_cyclic_needs_order(self):
        with pytest.raises(ValidationError, match="needs a positive 'n'"):
            GroupSpec(family="cyclic")

    def test_product_needs_two_factors(self):
        with pytest.raises(ValidationError):
            GroupSpec(family="product", factors=[GroupSpec(family="cyclic", n=2)])

    def test_nested_product(self):
        spec = GroupSpec(family="product", factors=[{"family": "cyclic", "n": 2}, {"family": "cyclic", "n": 3}])
        assert [f.n for f in spec.factors] == [2, 3]

    def test_table_family(self):
        spec = GroupSpec(family="table", table=[[0, 1], [1, 0]])
        assert spec.table == [[0, 1], [1, 0]]

    def test_unknown_family(self):
        with pytest.raises(ValidationError):
            GroupSpec(family="dihedral", n=4)


class TestModuleSpec:
    def test_minimal(self):
        spec = ModuleSpec(moduli=[2, 4])
        assert spec.theta is None
        assert spec.action is None

    def test_empty_moduli(self):
        with pytest.raises(ValidationError):
            ModuleSpec(moduli=[])

    def test_theta_shape(self):
        with pytest.raises(ValidationError, match="2x2"):
            ModuleSpec(moduli=[2, 2], theta=[[1, 0]])

    def test_both_action_forms(self):
        with pytest.raises(ValidationError, match="either 'action' or 'action_generators'"):
            ModuleSpec(moduli=[3], action=[[[1]], [[2]]], action_generators={1: [[2]]})

    def test_generator_keys_from_json(self):
        spec = ModuleSpec(moduli=[3], action_generators={"1": [[2]]})
        assert spec.action_generators == {1: [[2]]}


class TestProblemSpec:
    def test_tower_document(self):
        problem = ProblemSpec(**{
            "group": {"family": "cyclic", "n": 4},
            "module": {"moduli": [2]},
            "L": [0, 2],
            "chi": {"lamH": [{"args": [2, 1], "value": [1]}]},
        })
        assert problem.L == [0, 2]
        assert problem.M is None
        assert problem.chi.lamH[0].args == [2, 1]

    def test_M_needs_L(self):
        with pytest.raises(ValidationError, match="'M' needs 'L'"):
            ProblemSpec(group={"family": "cyclic", "n": 4}, module={"moduli": [2]}, M=[0])

    def test_chi_needs_L(self):
        with pytest.raises(ValidationError, match="'chi' needs the subgroup 'L'"):
            ProblemSpec(group={"family": "cyclic", "n": 4}, module={"moduli": [2]}, chi={})

    def test_cochain_degree_range(self):
        with pytest.raises(ValidationError):
            CochainSpec(degree=4)

    def test_obstruction_defaults(self):
        spec = ObstructionSpec(N=[0, 2])
        assert spec.cQ.degree == 3
        assert spec.d1.degree == 2
        assert spec.nu == []

    def test_obstruction_nu_arity(self):
        with pytest.raises(ValidationError):
            ObstructionSpec(N=[0, 2], nu=[{"args": [2, 2], "value": [1]}])


class TestReport:
    def test_verdict_from_dict(self):
        report = Report(command="cohomology", digest="x", verdict={"ok": True})
        assert isinstance(report.verdict, Verdict)
        assert report.exit_code == 0
        assert report.witnesses == []
