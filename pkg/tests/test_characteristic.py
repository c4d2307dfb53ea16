from itertools import product

import numpy as np
import pytest
from src.obslab.errors import FlowPartNotCobounding, InvalidCochain, InvalidXi
from src.obslab.services.characteristic import (
    CharContext,
    CharacteristicCocycle,
    build_characteristic,
    char_class_equal,
    compute_K,
    enumerate_characteristic,
    in_ZLM,
    in_ZLM_class,
    normalize_flow_part,
    perturb,
    res_of_torus_cocycle,
    res_preimage,
    restrict_to,
    twisted_extension,
    validate,
    validate_by_permutations,
)
from src.obslab.services.cochains import Cochain
from src.obslab.services.fixtures import fx1
from src.obslab.services.groups import NormalSubgroup, cyclic
from src.obslab.services.hjr import cohomologous_on, delta_hjr, delta_mod, partial_map
from src.obslab.services.modules import AbelianModule, FlowModule, GroupAction, ModuleAut


@pytest.fixture
def fixture():
    return fx1()


@pytest.fixture
def ctx(fixture):
    return fixture.chi.ctx


@pytest.fixture
def shear_ctx():
    """H = L = Z/4 acting trivially on Z/4 + Z/2 with theta(x, y) = (x + 2y, y) and torus Z/4 + 0."""
    H = cyclic(4)
    module = AbelianModule((4, 2))
    flow = FlowModule.build(module, GroupAction.trivial(H, module), ModuleAut.build(module, [[1, 2], [0, 1]]), torus=[1, 0])
    return CharContext.build(flow, NormalSubgroup.whole(H))


def with_flow_part(fixture):
    lamT = np.array([[0], [1]])
    return build_characteristic(fixture.chi.ctx, fixture.chi.mu, fixture.chi.lamH, lamT)


class TestValidate:
    def test_fixture_is_valid(self, fixture):
        assert validate(fixture.chi) == (True, None)
        assert validate_by_permutations(fixture.chi) == (True, None)

    def test_homomorphism_failure(self, ctx):
        lamH = np.zeros((2, 4, 1), dtype=np.int64)
        lamH[1, 1] = lamH[1, 2] = 1
        chi = CharacteristicCocycle.from_tables(ctx, np.zeros((2, 2, 1)), lamH, np.zeros((2, 1)))
        ok, failure = validate(chi)
        assert not ok
        assert failure["axiom"] == "homomorphism"
        assert not validate_by_permutations(chi)[0]

    def test_build_rejects(self, ctx):
        lamH = np.zeros((2, 4, 1), dtype=np.int64)
        lamH[1, 1] = lamH[1, 2] = 1
        with pytest.raises(InvalidCochain):
            build_characteristic(ctx, np.zeros((2, 2, 1)), lamH, np.zeros((2, 1)))

    def test_shape_mismatch(self, ctx):
        with pytest.raises(InvalidCochain, match="lamT"):
            CharacteristicCocycle.from_tables(ctx, np.zeros((2, 2, 1)), np.zeros((2, 4, 1)), np.zeros((3, 1)))

    def test_lookups_by_element(self, fixture):
        chi = fixture.chi
        assert chi.lamH_value(2, 3).tolist() == [1]
        assert chi.mu_value(2, 2).tolist() == [0]
        assert chi.lamT_value(2).tolist() == [0]
        assert chi.lam(5)[1].tolist() == [[0], [1], [0], [1]]

    def test_twisted_extension(self, fixture):
        ext = twisted_extension(fixture.chi)
        assert ext.total.order == 4
        assert ext.total.is_abelian()

    def test_enumeration_contains_fixture(self, fixture, ctx):
        found = enumerate_characteristic(ctx)
        assert any(chi.equals(fixture.chi) for chi in found)
        assert all(validate(chi)[0] for chi in found)


class TestSubgroupCondition:
    def test_K_is_L(self, fixture):
        assert compute_K(fixture.chi).members == (0, 2)

    def test_trivial_M(self, fixture):
        assert in_ZLM(fixture.chi, fixture.M) == (True, None)

    def test_flow_part_shrinks_K(self, fixture):
        chi = with_flow_part(fixture)
        assert compute_K(chi).members == (0,)
        ok, failure = in_ZLM(chi, fixture.L)
        assert not ok
        assert failure == {"condition": "K-contains-M", "m": 2}

    def test_class_level_search(self, fixture):
        a = in_ZLM_class(fixture.chi, fixture.M)
        assert a is not None
        assert not a.any()

    def test_restrict_to_trivial(self, fixture):
        restricted = restrict_to(fixture.chi, fixture.M)
        assert restricted.ctx.nL == 1
        assert restricted.flow.module.moduli == (2,)


class TestPerturbation:
    def test_class_equal(self, fixture):
        moved = perturb(fixture.chi, a=np.array([[0], [1]]))
        same, a = char_class_equal(fixture.chi, moved)
        assert same
        assert perturb(fixture.chi, a=a).equals(moved)

    def test_different_classes(self, fixture, ctx):
        same, a = char_class_equal(CharacteristicCocycle.trivial(ctx), fixture.chi)
        assert not same
        assert a is None

    def test_perturbation_must_be_normalized(self, fixture):
        with pytest.raises(InvalidCochain):
            perturb(fixture.chi, a=np.array([[1], [0]]))

    def test_xi_must_be_cocycle(self, fixture):
        xi = Cochain.from_entries(2, fixture.flow_H, {(1, 1): [1]})
        with pytest.raises(InvalidXi):
            perturb(fixture.chi, xi=xi)

    def test_normalize_flow_part(self, fixture):
        with pytest.raises(FlowPartNotCobounding):
            normalize_flow_part(with_flow_part(fixture))
        normalized, a = normalize_flow_part(fixture.chi)
        assert normalized.equals(fixture.chi)
        assert not a.any()


class TestBruteForceAgreement:
    def test_every_candidate_on_fx1(self, ctx):
        moduli = ctx.coord_moduli
        coords = np.array(list(product(*[range(int(m)) for m in moduli])), dtype=np.int64)
        mu, lamH, lamT = ctx.unpack(coords)
        accepted = 0
        for k in range(len(coords)):
            chi = CharacteristicCocycle(ctx=ctx, mu=mu[k], lamH=lamH[k], lamT=lamT[k])
            linear, _ = validate(chi)
            brute, _ = validate_by_permutations(chi)
            assert linear == brute, coords[k].tolist()
            accepted += linear
        assert accepted == len(enumerate_characteristic(ctx))

    def test_partial_of_delta_matches_restriction(self, fixture):
        tower = fixture.tower()
        chis = enumerate_characteristic(tower.ctx)
        assert any(chi.equals(fixture.chi) for chi in chis)
        for chi in chis:
            c_G = partial_map(delta_mod(chi, tower).obstruction)
            restricted = delta_hjr(restrict_to(chi, fixture.M), tower.lift, flow_Q=c_G.flow)
            assert cohomologous_on(c_G, restricted) is not None


class TestResImage:
    def test_fixture_not_in_image(self, fixture):
        assert res_preimage(fixture.chi) is None

    def test_trivial_in_image(self, ctx):
        pre = res_preimage(CharacteristicCocycle.trivial(ctx))
        assert pre is not None
        assert res_of_torus_cocycle(ctx, pre.mu0, a=pre.a).equals(CharacteristicCocycle.trivial(ctx))

    def test_res_of_flow_homomorphism(self, ctx):
        d = np.arange(4) % 2
        chi = res_of_torus_cocycle(ctx, np.zeros((4, 4), dtype=np.int64), d)
        assert chi.lamT.tolist() == [[0], [0]]
        assert validate(chi)[0]
        assert res_preimage(chi) is not None

    def test_flow_part_outside_theta_image_is_not_in_image(self, shear_ctx):
        # lamT(g) = (g, 0) is not in Im(theta - 1) = {(0, 0), (2, 0)}
        chi = res_of_torus_cocycle(shear_ctx, np.zeros((4, 4), dtype=np.int64), np.arange(4))
        assert chi.lamT.tolist() == [[0, 0], [1, 0], [2, 0], [3, 0]]
        assert res_preimage(chi) is None

    def test_flow_part_inside_theta_image_is_absorbed(self, shear_ctx):
        chi = res_of_torus_cocycle(shear_ctx, np.zeros((4, 4), dtype=np.int64), 2 * np.arange(4))
        pre = res_preimage(chi)
        assert pre is not None
        assert pre.a.any()
        assert res_of_torus_cocycle(shear_ctx, pre.mu0, a=pre.a).equals(chi)
