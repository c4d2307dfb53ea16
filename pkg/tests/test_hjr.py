import numpy as np
import pytest
from src.obslab.errors import ContextMismatch, FiberViolated, NotSubgroup, SectionMismatch
from src.obslab.services.cochains import Cochain, coboundary, is_coboundary, pullback
from src.obslab.services.fixtures import fx1, fx1_obstruction, fx_klein
from src.obslab.services.groups import CrossSection, enumerate_sections, quotient
from src.obslab.services.heisenberg import build_heisenberg_demo
from src.obslab.services.hjr import (
    ExtensionTower,
    build_obstruction,
    change_section,
    check_fiber,
    cobound_for_restricted,
    delta_hjr,
    delta_mod,
    inf_map,
    inverse_from_cobounding,
    obstruction_equal,
    partial_map,
    partial_map_data,
    section_transport_report,
)
from src.obslab.services.modules import AbelianModule, EquivariantHom, FlowModule
from src.obslab.services.standard import build_standard_two, h3s_class_equal


@pytest.fixture
def fixture():
    return fx1()


@pytest.fixture
def section(fixture):
    return CrossSection.minimal(quotient(fixture.flow_H.group, fixture.L))


class TestExtensionTower:
    def test_fx1(self, fixture):
        tower = fixture.tower()
        assert tower.G.order == 4
        assert tower.Q.order == 2
        assert tower.N.members == (0, 2)
        assert tower.dot.tolist() == [0, 1]
        assert tower.n_L.tolist() == [[0, 0], [0, 2]]

    def test_M_inside_L(self, fixture):
        with pytest.raises(NotSubgroup):
            ExtensionTower.build(fixture.flow_H, fixture.M, fixture.L)


class TestDeltaHJR:
    def test_fx1_is_nontrivial(self, fixture, section):
        c = delta_hjr(fixture.chi, section)
        assert c.entries() == [((1, 1, 1), [1])]
        assert is_coboundary(c) is None

    def test_section_must_match(self, fixture):
        other = CrossSection.minimal(quotient(fixture.flow_H.group, fixture.M))
        with pytest.raises(SectionMismatch):
            delta_hjr(fixture.chi, other)

    def test_inverse_from_cobounding(self, fixture, section):
        qd = section.quotient
        flow_Q = FlowModule.trivial(qd.quot, AbelianModule.cyclic(2))
        xi = Cochain.from_entries(3, flow_Q, {(1, 1, 1): [1]})
        mu = is_coboundary(pullback(xi, fixture.flow_H, qd.proj))
        chi, f = inverse_from_cobounding(xi, mu, section)
        assert (coboundary(f) + delta_hjr(chi, section, flow_Q=flow_Q)).equals(xi)

    def test_cobound_for_restricted(self, fixture):
        flow = fixture.flow_H
        carry = {(g, h): [1] for g in range(1, 4) for h in range(1, 4) if g + h >= 4}
        m = build_standard_two(flow, Cochain.from_entries(2, flow, carry),
                               Cochain.from_entries(1, flow, {(1,): [1], (3,): [1]}))
        tower = fixture.tower()
        f = cobound_for_restricted(m, tower)
        assert f.flow is tower.flow_Q
        assert f.d.value(1).tolist() == [1]


class TestDeltaMod:
    def test_fx1_obstruction(self, fixture):
        data = delta_mod(fixture.chi, fixture.tower())
        ob = data.obstruction
        assert ob.cocycle.cQ.entries() == [((1, 1, 1), [1])]
        assert ob.cocycle.d1.is_zero()
        assert ob.nu.is_zero()
        assert check_fiber(ob) == (True, None)

    def test_context_mismatch(self, fixture):
        with pytest.raises(ContextMismatch):
            delta_mod(fixture.chi, fx_klein().tower())

    def test_fiber_violation(self):
        _, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        zero = EquivariantHom(subgroup=ob.N, flow=ob.flow_G, values=np.zeros_like(ob.nu.values))
        with pytest.raises(FiberViolated):
            build_obstruction(ob.section, ob.cocycle, zero)


class TestPartialMap:
    def test_inflation_to_cyclic_four_is_trivial(self):
        ob = fx1_obstruction()
        c_G = partial_map(ob)
        assert c_G.group.order == 4
        assert is_coboundary(c_G) is not None

    def test_data_replays(self):
        ob = fx1_obstruction()
        data = partial_map_data(ob)
        assert data.f.is_zero()
        assert data.e.is_zero()

    def test_inf_map(self, fixture):
        tower = fixture.tower()
        ob = delta_mod(fixture.chi, tower).obstruction
        inflated = inf_map(ob, tower.g_data)
        assert inflated.group is tower.H
        assert is_coboundary(inflated) is not None

    def test_inf_map_needs_matching_projection(self, fixture):
        with pytest.raises(ContextMismatch):
            inf_map(fx1_obstruction(), fixture.tower().g_data)

    def test_heisenberg_partial_is_cocycle(self):
        _, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        c_G = partial_map(ob)
        assert coboundary(c_G).is_zero()


class TestSections:
    def test_change_and_compare(self):
        ob = fx1_obstruction()
        other = [s for s in enumerate_sections(ob.section.quotient, budget=1000) if s.sect.tolist() != ob.section.sect.tolist()][0]
        moved = change_section(ob, other)
        same, detail = obstruction_equal(ob, moved)
        assert same
        assert "a" in detail

    def test_transport_report(self):
        report = section_transport_report(fx1_obstruction())
        assert report == {"sections": 2, "chains": 8, "round_trips": 2}

    @pytest.mark.slow
    def test_heisenberg_transport_report(self):
        _, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        # four cosets of the center, two representatives for each non-identity coset
        assert section_transport_report(ob) == {"sections": 8, "chains": 512, "round_trips": 8}

    def test_heisenberg_round_trips(self):
        _, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        for other in enumerate_sections(ob.section.quotient, budget=1000):
            back = change_section(change_section(ob, other), ob.section)
            assert h3s_class_equal(back.cocycle, ob.cocycle)[0]

    def test_heisenberg_transport(self):
        _, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        other = CrossSection.build(ob.section.quotient, [0, 3, 5, 6])
        moved = change_section(ob, other)
        assert check_fiber(moved) == (True, None)
        assert obstruction_equal(moved, ob)[0]
