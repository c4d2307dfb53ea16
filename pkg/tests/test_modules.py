import numpy as np
import pytest
from src.obslab.errors import InvalidAction, InvalidAutomorphism, InvalidFlow, ProblemFormatError, TorusCoercionFailed
from src.obslab.services.groups import NormalSubgroup, cyclic, heisenberg_mod, quotient
from src.obslab.services.modules import (
    AbelianModule,
    FlowModule,
    GroupAction,
    ModuleAut,
    canonical_rep,
    check_equivariant_hom,
    enumerate_equivariant_homs,
    flow_h1,
    h1_class,
)

SWAP = [[0, 1], [1, 0]]


@pytest.fixture
def swap_flow():
    module = AbelianModule((2, 2))
    return FlowModule.build(module, GroupAction.trivial(cyclic(2), module), ModuleAut.build(module, SWAP))


class TestAbelianModule:
    def test_codes(self):
        A = AbelianModule((2, 4))
        assert A.size == 8
        assert A.encode(np.array([1, 3])) == 7
        assert A.decode(7).tolist() == [1, 3]
        assert A.describe() == "Z/2 + Z/4"

    def test_element_order(self):
        A = AbelianModule((2, 4))
        assert A.element_order([1, 2]) == 2
        assert A.element_order([0, 1]) == 4
        assert A.element_order([0, 0]) == 1

    def test_non_positive_modulus(self):
        with pytest.raises(ProblemFormatError):
            AbelianModule((2, 0))


class TestModuleAut:
    def test_not_an_endomorphism(self):
        # Z/2 -> Z/4 must land in 2Z/4
        with pytest.raises(InvalidAutomorphism) as info:
            ModuleAut.build(AbelianModule((2, 4)), [[1, 0], [1, 1]])
        assert info.value.witness["entry"] == [1, 0]

    def test_mixed_moduli_automorphism(self):
        aut = ModuleAut.build(AbelianModule((2, 4)), [[1, 0], [2, 1]])
        assert aut.apply(np.array([1, 0])).tolist() == [1, 2]

    def test_not_injective(self):
        with pytest.raises(InvalidAutomorphism, match="not injective"):
            ModuleAut.build(AbelianModule.cyclic(4), [[2]])

    def test_order_and_power(self):
        aut = ModuleAut.build(AbelianModule((2, 2)), SWAP)
        assert aut.order == 2
        assert aut.power(-1).equals(aut)
        assert aut.power(2).is_identity()


class TestGroupAction:
    def test_from_generators(self):
        action = GroupAction.from_generators(cyclic(2), AbelianModule.cyclic(3), {1: [[2]]})
        assert action.auts.tolist() == [[[1]], [[2]]]
        assert action.act(1, np.array([1])).tolist() == [2]

    def test_inconsistent_generators(self):
        # an element of order 3 cannot act by negation
        with pytest.raises(InvalidAction):
            GroupAction.from_generators(cyclic(3), AbelianModule.cyclic(3), {1: [[2]]})

    def test_not_a_homomorphism(self):
        with pytest.raises(InvalidAction, match="not a homomorphism"):
            GroupAction.build(cyclic(3), AbelianModule.cyclic(3), [[[1]], [[2]], [[2]]])

    def test_descend(self):
        G = cyclic(4)
        action = GroupAction.from_generators(G, AbelianModule.cyclic(3), {1: [[2]]})
        qd = quotient(G, NormalSubgroup.build(G, [0, 2]))
        assert action.descend(qd).auts.tolist() == [[[1]], [[2]]]

    def test_descend_needs_trivial_kernel(self):
        G = cyclic(2)
        action = GroupAction.from_generators(G, AbelianModule.cyclic(3), {1: [[2]]})
        with pytest.raises(InvalidAction, match="does not descend"):
            action.descend(quotient(G, NormalSubgroup.build(G, [0, 1])))


class TestFlowModule:
    def test_theta_must_commute(self):
        module = AbelianModule((2, 2))
        action = GroupAction.from_generators(cyclic(2), module, {1: SWAP})
        with pytest.raises(InvalidFlow, match="commute"):
            FlowModule.build(module, action, ModuleAut.build(module, [[1, 1], [0, 1]]))

    def test_torus(self, swap_flow):
        assert swap_flow.torus_generator.tolist() == [1, 1]
        assert swap_flow.torus_order == 2
        assert swap_flow.to_torus(np.array([[1, 1], [0, 0]])).tolist() == [1, 0]
        assert swap_flow.from_torus(np.array([1])).tolist() == [[1, 1]]
        assert swap_flow.is_ergodic()

    def test_torus_coercion(self, swap_flow):
        with pytest.raises(TorusCoercionFailed):
            swap_flow.to_torus(np.array([[1, 0]]))

    def test_explicit_torus_must_be_fixed(self):
        module = AbelianModule((2, 2))
        with pytest.raises(InvalidFlow):
            FlowModule.build(module, GroupAction.trivial(cyclic(2), module), ModuleAut.build(module, SWAP), torus=[1, 0])

    def test_coboundary_and_preimage(self, swap_flow):
        assert swap_flow.image_codes.tolist() == [0, 3]
        v = swap_flow.preimage(np.array([1, 1]))
        assert swap_flow.coboundary(v).tolist() == [1, 1]
        with pytest.raises(InvalidFlow):
            swap_flow.preimage(np.array([1, 0]))

    def test_canonical(self, swap_flow):
        assert swap_flow.canonical(np.array([1, 0])).tolist() == [0, 1]
        assert swap_flow.canonical(np.array([1, 1])).tolist() == [0, 0]
        assert swap_flow.class_representatives.tolist() == [[0, 0], [0, 1]]

    def test_bracket(self, swap_flow):
        assert swap_flow.bracket_matrix(0).tolist() == [[0, 0], [0, 0]]
        assert swap_flow.bracket_matrix(2).tolist() == [[1, 1], [1, 1]]
        assert swap_flow.bracket_matrix(-1).tolist() == SWAP

    def test_flow_h1(self, swap_flow):
        h1 = flow_h1(swap_flow)
        assert h1.invariant_factors == (2,)
        assert h1.order == 2
        assert h1.image_size == 2

    def test_h1_class(self, swap_flow):
        cls = h1_class([1, 1], swap_flow)
        assert cls.is_coboundary
        assert swap_flow.coboundary(np.array(cls.witness)).tolist() == [1, 1]
        assert not h1_class([0, 1], swap_flow).is_coboundary

    def test_canonical_rep_is_class_invariant(self, swap_flow):
        first, second = h1_class([1, 0], swap_flow), h1_class([0, 1], swap_flow)
        assert canonical_rep(first).tolist() == canonical_rep(second).tolist()
        assert canonical_rep(h1_class([1, 1], swap_flow)).tolist() == [0, 0]


class TestEquivariantHoms:
    def test_center_of_heisenberg(self):
        G = heisenberg_mod(2)
        N = NormalSubgroup.center(G)
        homs = enumerate_equivariant_homs(N, FlowModule.trivial(G, AbelianModule.cyclic(2)))
        assert len(homs) == 2
        assert homs[0].is_zero()
        assert homs[1](1).tolist() == [1]

    def test_not_additive(self):
        G = cyclic(4)
        N = NormalSubgroup.build(G, [0, 1, 2, 3])
        flow = FlowModule.trivial(G, AbelianModule.cyclic(2))
        failure = check_equivariant_hom(N, flow, np.array([[0], [1], [1], [1]]))
        assert failure["axiom"] == "additive"

    def test_valid_values(self):
        G = cyclic(4)
        N = NormalSubgroup.build(G, [0, 1, 2, 3])
        flow = FlowModule.trivial(G, AbelianModule.cyclic(2))
        assert check_equivariant_hom(N, flow, np.array([[0], [1], [0], [1]])) is None
