"""Resolution groups of 3-cocycles and the realization of modular obstructions.

For c in Z^3(G, A) the module B = A^G of functions carries
(alpha_p b)(q) = alpha_p(b(qp)); constants form a copy of A and C = B/A is
stored by representatives vanishing at the identity. u(g, h)(x) =
alpha_x^-1 c(x, g, h) is a 2-cochain in B whose image in C is a cocycle mu,
and H = M x_mu G is the extension by the submodule M generated by the
saturation of the range of mu. H element (m, g) has index g |M| + m.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional

import numpy as np

from ..errors import InvalidCochain, VerificationFailed, ensure_budget
from ..log import logger
from .characteristic import CharContext, CharacteristicCocycle, characteristic_from_two_cochain, validate
from .cochains import Cochain, coboundary, cohomologous, is_cocycle, pullback
from .groups import CrossSection, FiniteGroup, NormalSubgroup, QuotientData
from .hjr import (
    ExtensionTower,
    ModularObstruction,
    ObstructionCocycleData,
    PartialMapData,
    delta_hjr,
    delta_mod,
    obstruction_equal,
    partial_map_data,
)
from .modules import FlowModule


@dataclass(frozen=True, eq=False)
class ResolutionSystem:
    """H = M x_mu G with the characteristic cocycle chi over (H, M) realizing c."""

    source: Cochain
    big: FiniteGroup
    kernel: NormalSubgroup
    g_data: QuotientData
    chi: CharacteristicCocycle
    witness: Cochain
    lift_values: np.ndarray
    pullback_witness: Optional[Cochain]

    @property
    def base(self) -> FiniteGroup:
        return self.source.group

    @property
    def flow(self) -> FlowModule:
        return self.source.flow

    @property
    def projection(self) -> np.ndarray:
        return self.g_data.proj

    @property
    def section(self) -> CrossSection:
        return CrossSection.build(self.g_data, np.arange(self.base.order) * self.kernel.order)

    def summary(self) -> Dict:
        return {
            "G": self.base.order,
            "H": self.big.order,
            "M": self.kernel.order,
            "M_abelian": self.kernel.as_group.is_abelian(),
            "H_abelian": self.big.is_abelian(),
            "element_orders": sorted({self.big.element_order(h) for h in range(self.big.order)}),
        }


class _QuotientModule:
    """C = A^G / A in representatives vanishing at the identity."""

    def __init__(self, flow: FlowModule):
        self.flow = flow
        self.G = flow.group
        self.mod = flow.module.mod

    def normalize(self, vecs: np.ndarray) -> np.ndarray:
        return (vecs - vecs[..., :1, :]) % self.mod

    def act(self, g: int, vecs: np.ndarray) -> np.ndarray:
        """alpha_g on (K, |G|, r) representatives."""
        shifted = vecs[..., self.G.mul[:, g], :]
        return self.normalize(self.flow.action.act(g, shifted))

    def key(self, vec: np.ndarray) -> bytes:
        return np.ascontiguousarray(vec % self.mod).tobytes()


def _u_table(c: Cochain) -> np.ndarray:
    """u[g, h] = (x -> alpha_x^-1 c(x, g, h)) as a (|G|, |G|, |G|, r) array."""
    flow = c.flow
    G = c.group
    inverse_auts = np.stack([flow.action.auts[G.inv[x]] for x in range(G.order)])
    moved = np.einsum("xab,xghb->ghxa", inverse_auts, c.table)
    return moved % flow.module.mod


def _saturated_span(C: _QuotientModule, generators: np.ndarray, budget: int) -> np.ndarray:
    """Additive closure of the alpha-orbits of `generators`, zero first."""
    G = C.G
    orbit: Dict[bytes, np.ndarray] = {}
    for vec in generators:
        for g in range(G.order):
            moved = C.act(g, vec)
            if moved.any():
                orbit.setdefault(C.key(moved), moved)
    gens = list(orbit.values())
    zero = np.zeros_like(generators[0]) if len(generators) else np.zeros((G.order, C.flow.rank), dtype=np.int64)
    members: Dict[bytes, np.ndarray] = {C.key(zero): zero}
    frontier = [zero]
    while frontier:
        nxt = []
        for x in frontier:
            for v in gens:
                y = (x + v) % C.mod
                k = C.key(y)
                if k not in members:
                    members[k] = y
                    nxt.append(y)
        ensure_budget(len(members) * max(len(gens), 1), budget, "resolution kernel closure")
        frontier = nxt
    return np.stack(list(members.values()))


def resolve_three_cocycle(c: Cochain, budget: int = 5_000_000) -> ResolutionSystem:
    """A group H onto G with abelian kernel M and chi over (H, M) whose HJR cocycle is c."""
    if c.degree != 3:
        raise InvalidCochain(f"resolution needs a 3-cocycle, got degree {c.degree}")
    ok, where = is_cocycle(c)
    if not ok:
        raise InvalidCochain("resolution input is not a cocycle", witness={"tuple": list(where)})
    flow = c.flow
    G = c.group
    nG, r = G.order, flow.rank
    ensure_budget(nG ** 3 * nG * r, budget, "resolution cochain in A^G")

    C = _QuotientModule(flow)
    u = _u_table(c)
    members = _saturated_span(C, u.reshape(-1, nG, r), budget)
    nM = len(members)
    index = {C.key(v): i for i, v in enumerate(members)}

    def locate(vecs: np.ndarray) -> np.ndarray:
        flat = vecs.reshape(-1, nG, r)
        return np.array([index[C.key(v)] for v in flat], dtype=np.int64).reshape(vecs.shape[:-2])

    act_M = np.stack([locate(C.act(g, members)) for g in range(nG)])              # [g, m]
    add_M = locate((members[:, None] + members[None, :]) % C.mod)                  # [m, m']
    mu_M = locate(u)                                                               # [g, g']
    nH = nM * nG
    ensure_budget(nH * nH, budget, "resolution group table")

    g1, m1, g2, m2 = np.meshgrid(np.arange(nG), np.arange(nM), np.arange(nG), np.arange(nM), indexing="ij")
    table = G.mul[g1, g2] * nM + add_M[add_M[m1, act_M[g1, m2]], mu_M[g1, g2]]
    table = table.reshape(nH, nH)
    big = FiniteGroup.from_table(table, label=f"H({G.label})", check_associativity=nH ** 3 <= budget)
    logger.info(f"resolution of a 3-cocycle on {G.label}: |M| = {nM}, |H| = {nH}")

    kernel = NormalSubgroup.build(big, list(range(nM)))
    proj = np.arange(nH) // nM
    g_data = QuotientData.from_projection(big, kernel, G, proj)
    flow_H = flow.with_trivial_flow().pullback(big, proj)
    ctx = CharContext.build(flow_H, kernel)

    # lambda(x; (m, g)) = alpha_g(lift(alpha_g^-1 x)(g))
    moved = members[act_M[G.inv][:, :]]                                             # [g, x, q, a]
    values = np.stack([flow.action.act(g, moved[g, :, g]) for g in range(nG)], axis=1)   # [x, g, a]
    lamH = np.repeat(values, nM, axis=1)
    chi = CharacteristicCocycle.from_tables(ctx, np.zeros((nM, nM, r), dtype=np.int64), lamH,
                                            np.zeros((nM, r), dtype=np.int64))
    ok, failure = validate(chi)
    if not ok:
        raise VerificationFailed("resolution cocycle is not characteristic", witness=failure)

    section = CrossSection.build(g_data, np.arange(nG) * nM)
    realized = delta_hjr(chi, section, flow_Q=flow)
    if realized.equals(c):
        witness = Cochain.zero(2, flow)
    else:
        witness = cohomologous(c, realized, budget)
        if witness is None:
            raise VerificationFailed("HJR cocycle of the resolution is not cohomologous to the input")

    lift_values = np.stack([flow.action.act(g, members[:, g]) for g in range(nG)])  # [g, m', a]
    pullback_witness = None
    if nH ** 3 * r <= budget:
        gi, mi = proj, np.arange(nH) % nM
        pullback_witness = Cochain.build(2, flow_H, lift_values[gi[:, None], mi[None, :]])
        if not coboundary(pullback_witness).equals(pullback(c, flow_H, proj)):
            raise VerificationFailed("lifted cochain does not cobound the inflated cocycle on H")
    else:
        logger.debug("skipping the pullback witness check on H, too large for the budget")

    return ResolutionSystem(source=c, big=big, kernel=kernel, g_data=g_data, chi=chi, witness=witness,
                            lift_values=lift_values, pullback_witness=pullback_witness)


@dataclass(frozen=True, eq=False)
class ResolvedObstruction:
    system: ResolutionSystem
    tower: ExtensionTower
    chi: CharacteristicCocycle
    image: ObstructionCocycleData
    partial: PartialMapData


def _comparison_cochain(w0: np.ndarray, tower: ExtensionTower) -> List:
    dot, n_L, Q = tower.dot, tower.n_L, tower.Q
    W = (w0[dot[:, None], dot[None, :]] - w0[n_L, dot[Q.mul]]) % tower.flow_H.module.mod
    return [[[int(p), int(q)], W[p, q].tolist()] for p, q in np.argwhere(W.any(axis=-1))]


def resolve_obstruction(ob: ModularObstruction, budget: int = 5_000_000) -> ResolvedObstruction:
    """A tower H >= L >= M and chi over it with delta_mod(chi) equal to ob."""
    partial = partial_map_data(ob)
    system = resolve_three_cocycle(partial.c_G, budget)
    nM = system.kernel.order
    lift = CrossSection.build(system.g_data, np.arange(ob.G.order) * nM)
    tower = ExtensionTower.over_obstruction(system.g_data, ob.section, ob.flow_Q, ob.flow_G, lift=lift)

    flow_G = ob.flow_G
    proj = system.projection
    nH = system.big.order
    lifted = system.lift_values[proj[:, None], (np.arange(nH) % nM)[None, :]][..., 0]
    w0 = (partial.phi0.table[proj[:, None], proj[None, :]] + flow_G.from_torus(lifted)) % flow_G.module.mod
    v = partial.e.table[proj]
    chi = characteristic_from_two_cochain(tower.ctx, w0, v)
    ok, failure = validate(chi)
    if not ok:
        raise VerificationFailed("realizing cocycle is not characteristic",
                                 witness={"failure": failure, "W": _comparison_cochain(w0, tower)})

    image = delta_mod(chi, tower, budget=budget)
    same, detail = obstruction_equal(image.obstruction, ob, budget)
    if not same:
        raise VerificationFailed("delta of the realizing cocycle differs from the obstruction",
                                 witness={"detail": detail, "W": _comparison_cochain(w0, tower)})
    logger.info(f"obstruction realized over H of order {nH} with |L| = {tower.L.order}, |M| = {nM}")
    return ResolvedObstruction(system=system, tower=tower, chi=chi, image=image, partial=partial)
