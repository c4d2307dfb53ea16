"""Named small towers and cocycles shared by the command line and the tests."""

from dataclasses import dataclass
from typing import Callable, Dict, Optional

import numpy as np

from ..errors import ProblemFormatError
from .characteristic import CharContext, CharacteristicCocycle, build_characteristic
from .cochains import Cochain
from .groups import NormalSubgroup, cyclic, direct_product, heisenberg_mod
from .hjr import ExtensionTower, ModularObstruction, delta_mod
from .modules import AbelianModule, FlowModule


@dataclass(frozen=True, eq=False)
class TowerFixture:
    name: str
    flow_H: FlowModule
    L: NormalSubgroup
    M: NormalSubgroup
    chi: Optional[CharacteristicCocycle] = None

    def tower(self) -> ExtensionTower:
        return ExtensionTower.build(self.flow_H, self.L, self.M)


def fx1() -> TowerFixture:
    """H = Z/4, L = {0, 2}, M = 1, A = Z/2; chi has lamH(2; g) = g mod 2."""
    H = cyclic(4)
    flow = FlowModule.trivial(H, AbelianModule.cyclic(2))
    L = NormalSubgroup.build(H, [0, 2])
    lamH = np.zeros((2, 4, 1), dtype=np.int64)
    lamH[1, :, 0] = np.arange(4) % 2
    chi = build_characteristic(CharContext.build(flow, L), np.zeros((2, 2, 1), dtype=np.int64), lamH, np.zeros((2, 1), dtype=np.int64))
    return TowerFixture(name="FX1", flow_H=flow, L=L, M=NormalSubgroup.trivial(H), chi=chi)


def fx_klein() -> TowerFixture:
    """H = Z/2 x Z/2, L = the first factor, M = 1, A = Z/2."""
    H = direct_product([cyclic(2), cyclic(2)])
    flow = FlowModule.trivial(H, AbelianModule.cyclic(2))
    return TowerFixture(name="FX-KLEIN", flow_H=flow, L=NormalSubgroup.build(H, [0, 2]), M=NormalSubgroup.trivial(H))


def heis_tower(k: int = 2) -> TowerFixture:
    """H = Heis(k), L = center, M = 1, A = Z/k."""
    H = heisenberg_mod(k)
    flow = FlowModule.trivial(H, AbelianModule.cyclic(k))
    return TowerFixture(name=f"HEIS-{k}", flow_H=flow, L=NormalSubgroup.center(H), M=NormalSubgroup.trivial(H))


def fx_c2(value: int = 1, modulus: int = 2) -> Cochain:
    """The 3-cocycle on Z/2 with c(1, 1, 1) = value in Z/modulus."""
    flow = FlowModule.trivial(cyclic(2), AbelianModule.cyclic(modulus))
    return Cochain.from_entries(3, flow, {(1, 1, 1): [value]})


def fx1_obstruction() -> ModularObstruction:
    """delta of the FX1 cocycle: G = Z/4, N = {0, 2}, Q = Z/2 with cQ(1, 1, 1) = 1."""
    fixture = fx1()
    return delta_mod(fixture.chi, fixture.tower()).obstruction


TOWERS: Dict[str, Callable[[], TowerFixture]] = {
    "FX1": fx1,
    "FX-KLEIN": fx_klein,
    "HEIS-2": lambda: heis_tower(2),
    "HEIS-3": lambda: heis_tower(3),
}


def tower_fixture(name: str) -> TowerFixture:
    try:
        return TOWERS[name.upper()]()
    except KeyError:
        raise ProblemFormatError(f"unknown fixture '{name}'", witness={"known": sorted(TOWERS)}) from None
