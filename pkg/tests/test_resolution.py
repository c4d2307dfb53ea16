from itertools import product

import numpy as np
import pytest
from src.obslab.errors import InvalidCochain
from src.obslab.services.cochains import (
    Cochain,
    coboundary,
    cocycle_generators,
    cohomologous,
    cohomology,
    coord_moduli,
    enumerate_cocycles,
    is_cocycle,
    pullback,
)
from src.obslab.services.fixtures import fx1_obstruction, fx_c2
from src.obslab.services.groups import cyclic, direct_product
from src.obslab.services.heisenberg import build_heisenberg_demo
from src.obslab.services.hjr import delta_hjr, delta_mod, obstruction_equal
from src.obslab.services.modules import AbelianModule, FlowModule
from src.obslab.services.resolution import resolve_obstruction, resolve_three_cocycle


def klein_flow() -> FlowModule:
    return FlowModule.trivial(direct_product([cyclic(2), cyclic(2)]), AbelianModule.cyclic(2))


def klein_classes():
    """One representative for each of the 16 classes in H^3(Z/2 x Z/2, Z/2)."""
    basis = cohomology(klein_flow(), 3).basis
    for weights in product(range(2), repeat=len(basis)):
        c = Cochain.zero(3, basis[0].flow)
        for w, b in zip(weights, basis):
            if w:
                c = c + b
        yield c


def random_cocycles(count: int, seed: int):
    rng = np.random.default_rng(seed)
    flows = [
        FlowModule.trivial(cyclic(3), AbelianModule.cyclic(3)),
        FlowModule.trivial(cyclic(4), AbelianModule.cyclic(2)),
        klein_flow(),
    ]
    for i in range(count):
        flow = flows[i % len(flows)]
        gens = cocycle_generators(flow, 3)
        weights = rng.integers(0, int(flow.module.mod.max()), size=len(gens))
        yield Cochain.from_coords(3, flow, (weights @ gens) % coord_moduli(3, flow))


def assert_round_trip(c: Cochain):
    system = resolve_three_cocycle(c)
    realized = delta_hjr(system.chi, system.section, flow_Q=c.flow)
    assert coboundary(system.witness).equals(c - realized)
    if system.pullback_witness is not None:
        flow_H = system.pullback_witness.flow
        assert coboundary(system.pullback_witness).equals(pullback(c, flow_H, system.projection))


class TestResolveThreeCocycle:
    def test_fx_c2(self):
        c = fx_c2()
        system = resolve_three_cocycle(c)
        assert system.summary() == {
            "G": 2,
            "H": 4,
            "M": 2,
            "M_abelian": True,
            "H_abelian": True,
            "element_orders": [1, 2, 4],
        }

    def test_realizes_the_class(self):
        c = fx_c2()
        system = resolve_three_cocycle(c)
        realized = delta_hjr(system.chi, system.section, flow_Q=c.flow)
        assert coboundary(system.witness).equals(c - realized)
        assert cohomologous(c, realized) is not None

    def test_pullback_witness(self):
        c = fx_c2()
        system = resolve_three_cocycle(c)
        flow_H = system.pullback_witness.flow
        assert coboundary(system.pullback_witness).equals(pullback(c, flow_H, system.projection))

    def test_zero_cocycle(self):
        c = fx_c2(value=0)
        system = resolve_three_cocycle(c)
        assert system.kernel.order == 1
        assert system.big.order == 2

    def test_every_cocycle_on_cyclic_two(self):
        flow = fx_c2().flow
        cocycles = list(enumerate_cocycles(flow, 3))
        assert len(cocycles) == 2
        for c in cocycles:
            assert_round_trip(c)

    @pytest.mark.parametrize("index", range(16))
    def test_every_class_on_klein(self, index):
        c = list(klein_classes())[index]
        assert_round_trip(c)

    def test_random_cocycles_on_small_groups(self):
        for c in random_cocycles(50, seed=11):
            assert is_cocycle(c)[0]
            assert_round_trip(c)

    def test_rejects_wrong_degree(self):
        with pytest.raises(InvalidCochain):
            resolve_three_cocycle(Cochain.zero(2, fx_c2().flow))

    def test_rejects_non_cocycle(self):
        c = fx_c2(modulus=4)
        with pytest.raises(InvalidCochain):
            resolve_three_cocycle(c)


class TestResolveObstruction:
    def test_fx1_round_trip(self):
        ob = fx1_obstruction()
        resolved = resolve_obstruction(ob)
        same, _ = obstruction_equal(resolved.image.obstruction, ob)
        assert same
        assert resolved.tower.M.order == resolved.system.kernel.order

    @pytest.mark.slow
    def test_heisenberg_round_trip(self):
        _, ob = build_heisenberg_demo(2, AbelianModule.cyclic(2))
        resolved = resolve_obstruction(ob)
        image = delta_mod(resolved.chi, resolved.tower).obstruction
        same, _ = obstruction_equal(image, ob)
        assert same
