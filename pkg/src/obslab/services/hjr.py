"""Connecting maps between characteristic cocycles and third cohomology.

Everything is pinned to an ExtensionTower H >= L >= M with G = H/M,
N = L/M and Q = G/N, the section s: Q -> G, its lift s_H: G -> H and the
composite section of H -> Q. The kernel-valued section cocycles follow
s(p) s(q) = n(p, q) s(pq).
"""

from dataclasses import dataclass
from functools import cached_property
from itertools import product
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..errors import (
    ContextMismatch,
    FiberViolated,
    InvalidCochain,
    NotCobounding,
    NotInZLM,
    NotSubgroup,
    SectionMismatch,
    VerificationFailed,
    ensure_budget,
)
from ..log import logger
from .characteristic import (
    CharContext,
    CharacteristicCocycle,
    characteristic_from_two_cochain,
    in_ZLM,
    in_ZLM_class,
    perturb,
    res_standard_two,
    validate,
)
from .cochains import Cochain, coboundary, is_coboundary, pullback
from .groups import CrossSection, FiniteGroup, NormalSubgroup, QuotientData, enumerate_sections, quotient, section_cocycle
from .modules import EquivariantHom, FlowModule, check_equivariant_hom
from .standard import (
    StandardThree,
    StandardTwo,
    h3s_class_equal,
    validate_standard_three,
    window_coboundary_matches,
)


@dataclass(frozen=True, eq=False)
class ExtensionTower:
    flow_H: FlowModule
    L: NormalSubgroup
    M: NormalSubgroup
    g_data: QuotientData
    section: CrossSection
    lift: CrossSection
    flow_Q: FlowModule
    flow_G: FlowModule

    @classmethod
    def build(cls, flow_H: FlowModule, L: NormalSubgroup, M: NormalSubgroup,
              section: Optional[List[int]] = None, lift: Optional[List[int]] = None) -> "ExtensionTower":
        """Tower from H >= L >= M; sections default to minimal coset representatives."""
        H = flow_H.group
        if not M.is_subset(L):
            raise NotSubgroup("M must be contained in L", witness={"M": list(M.members), "L": list(L.members)})
        g_data = quotient(H, M, label=f"{H.label}/M")
        G = g_data.quot
        N = NormalSubgroup.build(G, sorted({int(g_data.proj[m]) for m in L.members}))
        q_data = quotient(G, N, label=f"{H.label}/L")
        hq_data = QuotientData.from_projection(H, L, q_data.quot, q_data.proj[g_data.proj])
        flow_Q = flow_H.descend(hq_data)
        flow_G = flow_Q.pullback(G, q_data.proj)
        s = CrossSection.build(q_data, section) if section is not None else CrossSection.minimal(q_data)
        s_H = CrossSection.build(g_data, lift) if lift is not None else CrossSection.minimal(g_data)
        return cls(flow_H=flow_H, L=L, M=M, g_data=g_data, section=s, lift=s_H, flow_Q=flow_Q, flow_G=flow_G)

    @classmethod
    def over_obstruction(cls, g_data: QuotientData, section: CrossSection, flow_Q: FlowModule, flow_G: FlowModule,
                         lift: Optional[CrossSection] = None) -> "ExtensionTower":
        """Tower above the quotient data of an obstruction, for a group H projecting onto G."""
        H = g_data.parent
        N = section.quotient.kernel
        L = NormalSubgroup.build(H, [h for h in range(H.order) if N.contains(int(g_data.proj[h]))])
        hq_proj = section.quotient.proj[g_data.proj]
        flow_H = flow_Q.pullback(H, hq_proj)
        return cls(flow_H=flow_H, L=L, M=g_data.kernel, g_data=g_data, section=section,
                   lift=lift if lift is not None else CrossSection.minimal(g_data), flow_Q=flow_Q, flow_G=flow_G)

    @property
    def H(self) -> FiniteGroup:
        return self.flow_H.group

    @property
    def G(self) -> FiniteGroup:
        return self.g_data.quot

    @property
    def Q(self) -> FiniteGroup:
        return self.section.quotient.quot

    @property
    def N(self) -> NormalSubgroup:
        return self.section.quotient.kernel

    @cached_property
    def ctx(self) -> CharContext:
        return CharContext.build(self.flow_H, self.L)

    @cached_property
    def dot(self) -> np.ndarray:
        """The composite section Q -> H."""
        return self.lift.sect[self.section.sect]

    @cached_property
    def n_N(self) -> np.ndarray:
        return section_cocycle(self.section).table

    @cached_property
    def n_L(self) -> np.ndarray:
        H, dot = self.H, self.dot
        return H.mul[H.mul[dot[:, None], dot[None, :]], H.inv[dot[self.Q.mul]]]

    def matches(self, chi: CharacteristicCocycle) -> bool:
        return chi.ctx.flow is self.flow_H and chi.ctx.L.members == self.L.members


@dataclass(frozen=True, eq=False)
class ModularObstruction:
    """A standard 3-cocycle on Q x Z pinned to a section, with nu in Hom_G(N, H^1_theta)."""

    section: CrossSection
    cocycle: StandardThree
    nu: EquivariantHom

    @property
    def G(self) -> FiniteGroup:
        return self.section.quotient.parent

    @property
    def N(self) -> NormalSubgroup:
        return self.section.quotient.kernel

    @property
    def flow_Q(self) -> FlowModule:
        return self.cocycle.flow

    @property
    def flow_G(self) -> FlowModule:
        return self.nu.flow

    @cached_property
    def n_N(self) -> np.ndarray:
        return section_cocycle(self.section).table

    @property
    def zeta(self) -> np.ndarray:
        """Canonical representatives of nu, indexed by positions in N."""
        return self.nu.values

    def is_trivial(self) -> bool:
        return self.cocycle.is_zero() and self.nu.is_zero()


@dataclass(frozen=True, eq=False)
class ObstructionCocycleData:
    obstruction: ModularObstruction
    zeta: np.ndarray


def check_fiber(ob: ModularObstruction) -> Tuple[bool, Optional[Dict]]:
    """nu is an equivariant homomorphism and [d1(q, r)] = nu(n_N(q, r)) everywhere."""
    failure = check_equivariant_hom(ob.N, ob.flow_G, ob.nu.values)
    if failure is not None:
        return False, failure
    flow = ob.flow_Q
    lhs = flow.class_codes(ob.cocycle.d1.table)
    rhs = flow.class_codes(ob.zeta[ob.N.positions[ob.n_N]])
    bad = np.argwhere(lhs != rhs)
    if len(bad):
        q, r = (int(v) for v in bad[0])
        return False, {"axiom": "fiber", "q": q, "r": r, "n": int(ob.n_N[q, r])}
    return True, None


def build_obstruction(section: CrossSection, cocycle: StandardThree, nu: EquivariantHom) -> ModularObstruction:
    ok, failure = validate_standard_three(cocycle)
    if not ok:
        raise InvalidCochain("obstruction cocycle is not standard", witness=failure)
    ob = ModularObstruction(section=section, cocycle=cocycle, nu=nu)
    ok, failure = check_fiber(ob)
    if not ok:
        raise FiberViolated("fiber condition fails", witness=failure)
    return ob


# ------------------------------------------------------------------ HJR maps

def _hjr_tables(chi: CharacteristicCocycle, dot: np.ndarray, n_L: np.ndarray, Q: FiniteGroup) -> Tuple[np.ndarray, np.ndarray]:
    """Pure part and flow part of the HJR cocycle of chi along the section `dot` of H -> Q."""
    ctx = chi.ctx
    pos = ctx.L.positions
    conj = ctx.H.conjugation_table()
    n = Q.order
    P, Qq, R = np.arange(n)[:, None, None], np.arange(n)[None, :, None], np.arange(n)[None, None, :]
    x = pos[conj[dot[P], n_L[Qq, R]]]
    first = chi.lamH[x, dot[P]]
    second = chi.mu[x, pos[n_L[P, Q.mul[Qq, R]]]]
    third = chi.mu[pos[n_L[P, Qq]], pos[n_L[Q.mul[P, Qq], R]]]
    mod = ctx.flow.module.mod
    return (first + second - third) % mod, chi.lamT[pos[n_L]] % mod


def delta_hjr(chi: CharacteristicCocycle, section: CrossSection, flow_Q: Optional[FlowModule] = None) -> Cochain:
    """The HJR 3-cocycle on Q = H/L of chi at flow parameter 0."""
    qd = section.quotient
    H = chi.ctx.H
    if qd.parent is not H or qd.kernel.members != chi.ctx.L.members:
        raise SectionMismatch("section must split H -> H/L for the subgroup of chi")
    flow_Q = flow_Q if flow_Q is not None else chi.flow.descend(qd)
    dot = section.sect
    n_L = section_cocycle(section).table
    cQ, _ = _hjr_tables(chi, dot, n_L, qd.quot)
    c = Cochain.build(3, flow_Q, cQ)
    if not coboundary(c).is_zero():
        raise VerificationFailed("HJR cochain is not a cocycle", witness={"entries": c.entries()[:8]})
    return c


def hjr_standard(chi: CharacteristicCocycle, tower: ExtensionTower) -> StandardThree:
    """The HJR cocycle on Q x Z in standard form: pure part and flow part d1 = lamT(n_L)."""
    cQ, d1 = _hjr_tables(chi, tower.dot, tower.n_L, tower.Q)
    c = StandardThree(flow=tower.flow_Q, cQ=Cochain.build(3, tower.flow_Q, cQ), d1=Cochain.build(2, tower.flow_Q, d1))
    ok, failure = validate_standard_three(c)
    if not ok:
        raise VerificationFailed("HJR cocycle on Q x Z is not standard", witness=failure)
    return c


def inverse_from_cobounding(xi: Cochain, mu: Cochain, section: CrossSection) -> Tuple[CharacteristicCocycle, Cochain]:
    """Characteristic cocycle on (G, N) and f on Q with xi = coboundary(f) + delta_hjr(chi)."""
    qd = section.quotient
    G, Q = qd.parent, qd.quot
    if mu.group is not G or xi.group is not Q:
        raise SectionMismatch("xi must live on the quotient and mu on the group of the section")
    inflated = xi.table[np.ix_(qd.proj, qd.proj, qd.proj)]
    d_mu = coboundary(mu).table
    if not (d_mu == inflated).all():
        where = np.argwhere((d_mu != inflated).any(axis=-1))[0].tolist()
        raise NotCobounding("coboundary of mu differs from the inflation of xi", witness={"tuple": where})

    ctx = CharContext.build(mu.flow.with_trivial_flow(), qd.kernel)
    chi = characteristic_from_two_cochain(ctx, mu.table, np.zeros_like(mu.table[:, 0]))
    ok, failure = validate(chi)
    if not ok:
        raise VerificationFailed("inverse construction produced an invalid characteristic cocycle", witness=failure)

    s = section.sect
    n_N = section_cocycle(section).table
    f_table = (mu.table[s[:, None], s[None, :]] - mu.table[n_N, s[Q.mul]]) % mu.flow.module.mod
    f = Cochain.build(2, xi.flow, f_table)
    c = delta_hjr(chi, section, flow_Q=xi.flow)
    if not (coboundary(f) + c).equals(xi):
        raise VerificationFailed("xi differs from coboundary(f) + delta_hjr(chi)")
    return chi, f


def delta_mod(chi: CharacteristicCocycle, tower: ExtensionTower, allow_class: bool = True, budget: int = 5_000_000) -> ObstructionCocycleData:
    """The modified connecting map into the fiber product, at the tower's sections."""
    if not tower.matches(chi):
        raise ContextMismatch("characteristic cocycle is not over the tower's H and L")
    ok, failure = validate(chi)
    if not ok:
        raise InvalidCochain("not a characteristic cocycle", witness=failure)
    ok, failure = in_ZLM(chi, tower.M)
    if not ok:
        a = in_ZLM_class(chi, tower.M, budget) if allow_class else None
        if a is None:
            raise NotInZLM("subgroup condition fails for M", witness=failure)
        logger.debug("subgroup condition holds after a perturbation on M")
        chi = perturb(chi, a=a)

    cocycle = hjr_standard(chi, tower)
    N = tower.N
    pos = tower.ctx.L.positions
    zeta = chi.lamT[pos[tower.lift.sect[N.index_array]]]
    nu = EquivariantHom(subgroup=N, flow=tower.flow_G, values=tower.flow_G.canonical(zeta))
    ob = ModularObstruction(section=tower.section, cocycle=cocycle, nu=nu)
    ok, failure = check_fiber(ob)
    if not ok:
        raise VerificationFailed("modified delta violates the fiber condition", witness=failure)
    return ObstructionCocycleData(obstruction=ob, zeta=zeta)


def cobound_for_restricted(m: StandardTwo, tower: ExtensionTower, window: int = 2) -> StandardTwo:
    """f on Q x Z (stored like a standard 2-cochain) whose coboundary is the HJR cocycle of Res(m)."""
    if m.flow is not tower.flow_H:
        raise ContextMismatch("standard 2-cocycle must live over the tower's H")
    flow = tower.flow_Q
    mod = flow.module.mod
    dot, n_L, Q = tower.dot, tower.n_L, tower.Q
    muH, d = m.muH.table, m.d.table
    F0 = (-muH[dot[:, None], dot[None, :]] + muH[n_L, dot[Q.mul]]) % mod
    E = (-d[dot]) % mod
    f = StandardTwo(flow=flow, muH=Cochain.build(2, flow, F0), d=Cochain.build(1, flow, E))

    target = hjr_standard(res_standard_two(m, tower.L, tower.ctx), tower)
    failure = window_coboundary_matches(f.expansion_table(2 * window), target, window)
    if failure is not None:
        raise VerificationFailed("coboundary of f differs from the restricted HJR cocycle", witness=failure)
    return f


# ------------------------------------------------------------------ partial and inflation

@dataclass(frozen=True, eq=False)
class PartialMapData:
    """c_G = inflation of the pure part minus coboundary(phi0), phi0 = inflation of f + a, flow part cleared by e."""

    c_G: Cochain
    f: Cochain
    e: Cochain
    a: Cochain
    phi0: Cochain


def partial_map_data(ob: ModularObstruction) -> PartialMapData:
    G = ob.G
    flow_G = ob.flow_G
    flow_Q = ob.flow_Q
    mod = flow_G.module.mod
    qd = ob.section.quotient
    proj = qd.proj
    zeta = ob.zeta
    pos = ob.N.positions

    rhs_f = (ob.cocycle.d1.table - zeta[pos[ob.n_N]]) % mod
    if not flow_Q.is_flow_coboundary(rhs_f).all():
        q, r = np.argwhere(~flow_Q.is_flow_coboundary(rhs_f))[0].tolist()
        raise FiberViolated("d1 - zeta(n_N) is not a flow coboundary", witness={"q": q, "r": r})
    f = Cochain.build(2, flow_Q, flow_Q.preimage(rhs_f))

    n_of = G.mul[np.arange(G.order), G.inv[ob.section.sect[proj]]]
    e = Cochain.build(1, flow_G, zeta[pos[n_of]])
    rhs_a = (zeta[pos[ob.n_N[proj[:, None], proj[None, :]]]] + coboundary(e).table) % mod
    if not flow_G.is_flow_coboundary(rhs_a).all():
        g, h = np.argwhere(~flow_G.is_flow_coboundary(rhs_a))[0].tolist()
        raise FiberViolated("nu is not compatible with the section cocycle", witness={"g": g, "h": h})
    a = Cochain.build(2, flow_G, flow_G.preimage(rhs_a))

    phi0 = pullback(f, flow_G, proj) + a
    flow_part = (phi0.table @ flow_G.theta_minus_one.T - coboundary(e).table) % mod
    inflated_d1 = ob.cocycle.d1.table[np.ix_(proj, proj)]
    if not (flow_part == inflated_d1).all():
        raise VerificationFailed("flow part of the inflated obstruction was not cleared")

    values = (pullback(ob.cocycle.cQ, flow_G, proj).table - coboundary(phi0).table) % mod
    torus = flow_G.torus_module()
    c_G = Cochain.build(3, torus, flow_G.to_torus(values)[..., None])
    if not coboundary(c_G).is_zero():
        raise VerificationFailed("torus-valued cocycle on G fails the cocycle identity")
    return PartialMapData(c_G=c_G, f=f, e=e, a=a, phi0=phi0)


def partial_map(ob: ModularObstruction) -> Cochain:
    """A torus-valued 3-cocycle on G representing the image of the obstruction."""
    return partial_map_data(ob).c_G


def inf_map(ob: ModularObstruction, g_data: QuotientData) -> Cochain:
    """partial_map pulled back along H -> G."""
    if g_data.quot is not ob.G:
        raise ContextMismatch("projection must land in the obstruction's group")
    c_G = partial_map(ob)
    torus_H = c_G.flow.torus_module(g_data.parent)
    return pullback(c_G, torus_H, g_data.proj)


# ------------------------------------------------------------------ sections and equality

def change_section(ob: ModularObstruction, new_section: CrossSection) -> ModularObstruction:
    """Transport to another section s' of G -> Q: d1 moves by the coboundary of zeta(s'(q) s(q)^-1)."""
    if new_section.quotient is not ob.section.quotient:
        raise SectionMismatch("sections must split the same quotient")
    G = ob.G
    flow = ob.flow_Q
    shift = G.mul[new_section.sect, G.inv[ob.section.sect]]
    e = Cochain.build(1, flow, ob.zeta[ob.N.positions[shift]])
    d1 = ob.cocycle.d1 + coboundary(e)
    moved = ModularObstruction(section=new_section, cocycle=StandardThree(flow=flow, cQ=ob.cocycle.cQ, d1=d1), nu=ob.nu)
    ok, failure = check_fiber(moved)
    if not ok:
        raise VerificationFailed("transported obstruction violates the fiber condition", witness=failure)
    return moved


def _same_coefficients(first: FlowModule, second: FlowModule) -> bool:
    if first is second:
        return True
    return (first.group is second.group and first.module.moduli == second.module.moduli
            and bool((first.theta.matrix == second.theta.matrix).all())
            and bool((first.action.auts == second.action.auts).all()))


def _rebase(c: StandardThree, flow: FlowModule) -> StandardThree:
    return StandardThree(flow=flow, cQ=Cochain(3, flow, c.cQ.table), d1=Cochain(2, flow, c.d1.table))


def obstruction_equal(first: ModularObstruction, second: ModularObstruction, budget: int = 5_000_000) -> Tuple[bool, Optional[Dict]]:
    """Equality in the fiber product group, transporting `second` to the section of `first` when needed."""
    if (second.section.quotient is not first.section.quotient
            or not _same_coefficients(first.flow_Q, second.flow_Q)):
        raise ContextMismatch("obstructions live over different quotients or coefficients")
    if not (first.section.sect == second.section.sect).all():
        second = change_section(second, first.section)
    diff = np.flatnonzero((first.nu.values != second.nu.values).any(axis=1))
    if len(diff):
        return False, {"nu": int(first.N.members[diff[0]])}
    same, a = h3s_class_equal(first.cocycle, _rebase(second.cocycle, first.flow_Q), budget)
    if not same:
        return False, {"cocycle": "classes differ"}
    return True, {"a": [[list(args), value] for args, value in a.entries()]}


def section_transport_report(ob: ModularObstruction, budget: int = 5_000_000) -> Dict:
    """Chain rule and round trip of section transport over every pair and triple of sections."""
    sections = list(enumerate_sections(ob.section.quotient, budget))
    ensure_budget(len(sections) ** 3, budget, "section transport triples")
    moved = {}
    for s1 in sections:
        moved[tuple(s1.sect)] = change_section(ob, s1)
    chain_checked = 0
    for s1, s2, s3 in product(sections, repeat=3):
        via = change_section(change_section(moved[tuple(s1.sect)], s2), s3)
        direct = moved[tuple(s3.sect)]
        same, _ = h3s_class_equal(via.cocycle, direct.cocycle, budget)
        if not same:
            raise VerificationFailed("section transport chain rule fails",
                                     witness={"sections": [s1.sect.tolist(), s2.sect.tolist(), s3.sect.tolist()]})
        chain_checked += 1
    for s1 in sections:
        back = change_section(moved[tuple(s1.sect)], ob.section)
        same, _ = h3s_class_equal(back.cocycle, ob.cocycle, budget)
        if not same:
            raise VerificationFailed("section transport round trip fails", witness={"section": s1.sect.tolist()})
    logger.info(f"section transport: {len(sections)} sections, {chain_checked} chains checked")
    return {"sections": len(sections), "chains": chain_checked, "round_trips": len(sections)}


def cohomologous_on(first: Cochain, second: Cochain, budget: int = 5_000_000) -> Optional[Cochain]:
    """Coboundary witness for first - second, when both live on the same group and coefficients."""
    if first.flow is not second.flow:
        second = Cochain(second.degree, first.flow, second.table)
    if first.equals(second):
        return Cochain.zero(first.degree - 1, first.flow)
    return is_coboundary(first - second, budget)


def tables_of(chi: CharacteristicCocycle) -> Dict:
    return {"mu": chi.mu.tolist(), "lamH": chi.lamH.tolist(), "lamT": chi.lamT.tolist()}
