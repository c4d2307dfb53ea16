import numpy as np
import pytest
from src.obslab.errors import IncompatibleModulus
from src.obslab.services.cochains import coboundary
from src.obslab.services.heisenberg import (
    Obstructed,
    Split,
    antisymmetry_invariant,
    build_heisenberg_demo,
    demo_report,
    fixture_section_cocycle,
    necessary_test,
    splitting_test,
)
from src.obslab.services.modules import AbelianModule, ModuleAut
from src.obslab.services.standard import standard_coboundary


class TestHeisenbergFixture:
    def test_coordinates(self):
        fixture, _ = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        assert [fixture.coordinates(q) for q in range(4)] == [(0, 0), (0, 1), (1, 0), (1, 1)]

    def test_section_cocycle_is_product(self):
        k = 3
        fixture, _ = build_heisenberg_demo(k, AbelianModule.cyclic(k))
        n_N = fixture_section_cocycle(fixture)
        for q in range(k * k):
            for r in range(k * k):
                a, _ = fixture.coordinates(q)
                _, b = fixture.coordinates(r)
                assert n_N[q, r] == (a * b) % k

    def test_nu_order(self):
        fixture, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        assert fixture.nu_order() == 2
        assert ob.nu(1).tolist() == [1]

    def test_incompatible_modulus(self):
        with pytest.raises(IncompatibleModulus):
            build_heisenberg_demo(2, AbelianModule.cyclic(3))


class TestSplitting:
    def test_injective_nu_is_obstructed(self):
        _, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        result = splitting_test(ob)
        assert isinstance(result, Obstructed)
        assert result.verdict == "OBSTRUCTED"
        assert result.candidates == 8
        assert necessary_test(ob) == (False, None)

    def test_zero_class_splits(self):
        _, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2), w=[0])
        result = splitting_test(ob)
        assert isinstance(result, Split)
        assert result.verdict == "SPLIT"
        replay = standard_coboundary(result.a)
        assert replay.d1.equals(ob.cocycle.d1 + coboundary(result.b))

    def test_flow_coboundary_splits(self):
        module = AbelianModule((2, 2))
        theta = ModuleAut.build(module, [[0, 1], [1, 0]])
        _, ob = build_heisenberg_demo(2, module, theta=theta, w=[1, 1])
        assert ob.nu.is_zero()
        assert isinstance(splitting_test(ob), Split)

    def test_antisymmetry(self):
        fixture, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        form = antisymmetry_invariant(ob)
        q, r = 2, 1
        assert fixture.coordinates(q) == (1, 0) and fixture.coordinates(r) == (0, 1)
        assert form[q, r].tolist() == [1]
        assert form[r, q].tolist() == [1]
        assert not np.diagonal(form, axis1=0, axis2=1).any()


class TestVerdictsAcrossModuli:
    @pytest.mark.parametrize("k", [2, pytest.param(3, marks=pytest.mark.slow)])
    def test_injective_nu_is_obstructed(self, k):
        _, ob = build_heisenberg_demo(k, AbelianModule.cyclic(k))
        result = splitting_test(ob)
        assert isinstance(result, Obstructed)
        assert result.candidates == k ** ((k * k) - 1)
        assert necessary_test(ob)[0] is False

    @pytest.mark.parametrize("k", [2, pytest.param(3, marks=pytest.mark.slow)])
    def test_zero_nu_splits(self, k):
        _, ob = build_heisenberg_demo(k, AbelianModule.cyclic(k), w=[0])
        result = splitting_test(ob)
        assert isinstance(result, Split)
        assert necessary_test(ob)[0] is True

    @pytest.mark.parametrize("k, w", [(2, [1]), (2, [0]), pytest.param(3, [1], marks=pytest.mark.slow),
                                      pytest.param(3, [2], marks=pytest.mark.slow), (3, [0])])
    def test_split_implies_necessary(self, k, w):
        _, ob = build_heisenberg_demo(k, AbelianModule.cyclic(k), w=w)
        necessary, _ = necessary_test(ob)
        if isinstance(splitting_test(ob), Split):
            assert necessary


class TestDemoReport:
    def test_obstructed(self):
        _, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        report = demo_report(ob)
        assert report["verdict"] == "OBSTRUCTED"
        assert report["necessary"] is False
        assert report["alternating_nonzero"] is True
        assert report["split"] is None

    def test_split(self):
        _, ob = build_heisenberg_demo(3, AbelianModule.cyclic(3), w=[0])
        report = demo_report(ob)
        assert report["verdict"] == "SPLIT"
        assert report["necessary"] is True
        assert isinstance(report["split"], Split)
