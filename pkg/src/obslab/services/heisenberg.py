"""The finite Heisenberg obstruction and the splitting test.

G = Heis(k) with center N = {(0, 0, c)} and Q = G/N = (Z/k)^2. With the
section (a, b) -> (a, b, 0) the section cocycle is n_N((a, b), (a', b')) = ab',
and a flow class w of order dividing k gives the obstruction with cQ = 0,
d1 = n_N w and nu(c) = c w.
"""

from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import IncompatibleModulus, VerificationFailed, ensure_budget
from ..log import logger
from .cochains import Cochain, coboundary, coboundary_tables, coord_moduli, coords_to_tables, tables_to_coords
from .groups import CrossSection, FiniteGroup, NormalSubgroup, QuotientData, heisenberg_mod, quotient
from .hjr import ModularObstruction, build_obstruction
from .linalg import CongruenceSystem, matrix_of
from .modules import AbelianModule, EquivariantHom, FlowModule, GroupAction, ModuleAut
from .standard import StandardThree, flow_linear, standard_coboundary, standard_coboundary_batch


@dataclass(frozen=True, eq=False)
class HeisenbergFixture:
    k: int
    G: FiniteGroup
    N: NormalSubgroup
    q_data: QuotientData
    section: CrossSection
    flow_G: FlowModule
    flow_Q: FlowModule
    w: np.ndarray

    def coordinates(self, q: int) -> Tuple[int, int]:
        """(a, b) of a quotient element."""
        rep = int(self.section.sect[q])
        return rep // (self.k * self.k), (rep // self.k) % self.k

    def nu_order(self) -> int:
        """Smallest n > 0 with n w trivial in H^1."""
        for n in range(1, self.k + 1):
            if not int(self.flow_G.class_codes(n * self.w)):
                return n
        return self.k


def _torsion_lift(flow: FlowModule, w: np.ndarray, k: int) -> np.ndarray:
    """An element of w + Im(theta - 1) killed by k."""
    module = flow.module
    if int(flow.class_codes(k * w)):
        raise IncompatibleModulus("k w is not trivial in H^1", witness={"k": k, "w": w.tolist()})
    candidates = module.reduce(w[None, :] + module.decode(flow.image_codes))
    killed = np.flatnonzero(~module.reduce(k * candidates).any(axis=1))
    if not len(killed):
        raise IncompatibleModulus("no representative of the class of w is killed by k", witness={"k": k, "w": w.tolist()})
    return candidates[killed[0]]


def build_heisenberg_demo(k: int, module: AbelianModule, theta: Optional[ModuleAut] = None,
                          w: Sequence[int] = (1,)) -> Tuple[HeisenbergFixture, ModularObstruction]:
    """(HeisenbergFixture, ModularObstruction) for Heis(k) with trivial action on A."""
    G = heisenberg_mod(k)
    N = NormalSubgroup.center(G)
    q_data = quotient(G, N, label=f"Z/{k}xZ/{k}")
    section = CrossSection.minimal(q_data)
    flow_G = FlowModule.build(module, GroupAction.trivial(G, module), theta)
    flow_Q = flow_G.descend(q_data)

    w = module.reduce(np.asarray(w, dtype=np.int64).reshape(module.rank))
    lift = _torsion_lift(flow_G, w, k)
    fixture = HeisenbergFixture(k=k, G=G, N=N, q_data=q_data, section=section, flow_G=flow_G, flow_Q=flow_Q, w=lift)

    n_N = fixture_section_cocycle(fixture)
    d1 = Cochain.build(2, flow_Q, n_N[..., None] * lift)
    cocycle = StandardThree(flow=flow_Q, cQ=Cochain.zero(3, flow_Q), d1=d1)
    values = flow_G.canonical(np.arange(N.order)[:, None] * lift[None, :])
    nu = EquivariantHom(subgroup=N, flow=flow_G, values=values)
    ob = build_obstruction(section, cocycle, nu)
    logger.info(f"Heisenberg obstruction for k = {k}, w = {w.tolist()}, nu of order {fixture.nu_order()}")
    return fixture, ob


def fixture_section_cocycle(fixture: HeisenbergFixture) -> np.ndarray:
    """ab' mod k on Q x Q, read off the center element s(q) s(r) s(qr)^-1."""
    G, s, Q = fixture.G, fixture.section.sect, fixture.q_data.quot
    table = G.mul[G.mul[s[:, None], s[None, :]], G.inv[s[Q.mul]]]
    return fixture.N.positions[table]


# ------------------------------------------------------------------ splitting

@dataclass(frozen=True, eq=False)
class Split:
    b: Cochain
    a: Cochain
    candidates_scanned: int

    verdict: str = field(default="SPLIT", init=False)


@dataclass(frozen=True, eq=False)
class Obstructed:
    candidates: int
    certificate: Dict

    verdict: str = field(default="OBSTRUCTED", init=False)


SplittingResult = Union[Split, Obstructed]


def _joint_system(flow: FlowModule, budget: int) -> CongruenceSystem:
    """(a, b) -> (coboundary(a), (theta - 1) a - coboundary(b)) on C^2(Q, A) + C^1(Q, A)."""
    n_a = len(coord_moduli(2, flow))
    n_b = len(coord_moduli(1, flow))
    rows = np.concatenate([coord_moduli(3, flow), coord_moduli(2, flow)])
    ensure_budget((n_a + n_b) * len(rows), budget, "joint splitting system")

    def apply(coords: np.ndarray) -> np.ndarray:
        a = coords_to_tables(coords[:, :n_a], 2, flow)
        b = coords_to_tables(coords[:, n_a:], 1, flow)
        linkage = (flow_linear(flow, a) - coboundary_tables(b, 1, flow)) % flow.module.mod
        return np.hstack([tables_to_coords(coboundary_tables(a, 2, flow), 3), tables_to_coords(linkage, 2)])

    return CongruenceSystem(matrix_of(apply, n_a + n_b), rows, np.concatenate([coord_moduli(2, flow), coord_moduli(1, flow)]))


def splitting_test(ob: ModularObstruction, budget: int = 5_000_000, chunk: int = 2048) -> SplittingResult:
    """Search normalized b: Q -> A, in lexicographic order, with (cQ, d1 + coboundary(b)) in B^3_s."""
    flow = ob.flow_Q
    moduli = coord_moduli(1, flow)
    total = 1
    for m in moduli.tolist():
        total *= int(m)
    ensure_budget(total * len(coord_moduli(3, flow)), budget, "splitting search")

    joint = _joint_system(flow, budget).solve(np.concatenate([ob.cocycle.cQ.coords(), ob.cocycle.d1.coords()]))
    cQ = ob.cocycle.cQ.coords()
    d1 = ob.cocycle.d1.table
    found = None
    scanned = 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        coords = np.zeros((len(idx), len(moduli)), dtype=np.int64)
        rest = idx.copy()
        for j in range(len(moduli) - 1, -1, -1):
            coords[:, j] = rest % moduli[j]
            rest //= moduli[j]
        b = coords_to_tables(coords, 1, flow)
        shifted = (d1[None] + coboundary_tables(b, 1, flow)) % flow.module.mod
        ok, a = standard_coboundary_batch(flow, np.broadcast_to(cQ, (len(idx), len(cQ))), tables_to_coords(shifted, 2), budget)
        hits = np.flatnonzero(ok)
        if len(hits):
            scanned += int(hits[0]) + 1
            found = (coords[hits[0]], a[hits[0]])
            break
        scanned += len(idx)

    if found is None:
        if joint is not None:
            raise VerificationFailed("joint solve splits but the exhaustive scan found nothing")
        logger.info(f"splitting test: obstructed after {total} candidates")
        return Obstructed(candidates=total, certificate={"scanned": total, "joint": "unsolvable"})
    if joint is None:
        raise VerificationFailed("exhaustive scan splits but the joint solve has no solution")

    b = Cochain.from_coords(1, flow, found[0])
    a = Cochain.from_coords(2, flow, found[1])
    replay = standard_coboundary(a)
    if not (replay.cQ.equals(ob.cocycle.cQ) and replay.d1.equals(ob.cocycle.d1 + coboundary(b))):
        raise VerificationFailed("splitting witnesses do not replay")
    logger.info(f"splitting test: split after {scanned} candidates")
    return Split(b=b, a=a, candidates_scanned=scanned)


def necessary_test(ob: ModularObstruction, budget: int = 5_000_000) -> Tuple[bool, Optional[Cochain]]:
    """Whether nu(n_N) is a coboundary with values in H^1: nu(n_N) = coboundary(y) + (theta - 1) z. Returns (bool, y or None)."""
    flow = ob.flow_Q
    target = ob.zeta[ob.N.positions[ob.n_N]]
    n_y = len(coord_moduli(1, flow))
    n_z = len(coord_moduli(2, flow))
    rows = coord_moduli(2, flow)
    ensure_budget((n_y + n_z) * len(rows), budget, "necessary condition system")

    def apply(coords: np.ndarray) -> np.ndarray:
        y = coords_to_tables(coords[:, :n_y], 1, flow)
        z = coords_to_tables(coords[:, n_y:], 2, flow)
        return tables_to_coords((coboundary_tables(y, 1, flow) + flow_linear(flow, z)) % flow.module.mod, 2)

    system = CongruenceSystem(matrix_of(apply, n_y + n_z), rows, np.concatenate([coord_moduli(1, flow), rows]))
    x = system.solve(tables_to_coords(target[None], 2)[0])
    if x is None:
        return False, None
    y = Cochain.from_coords(1, flow, x[:n_y])
    z = Cochain.from_coords(2, flow, x[n_y:])
    residual = (coboundary(y).table + flow_linear(flow, z.table) - target) % flow.module.mod
    if residual.any():
        raise VerificationFailed("necessary condition witness does not replay")
    return True, y


def antisymmetry_invariant(ob: ModularObstruction) -> np.ndarray:
    """(q, r) -> nu(n_N(q, r)) - nu(n_N(r, q)) in canonical H^1 representatives."""
    values = ob.zeta[ob.N.positions[ob.n_N]]
    return ob.flow_Q.canonical(values - values.transpose(1, 0, 2))


def demo_report(ob: ModularObstruction, budget: int = 5_000_000) -> Dict:
    """Splitting verdict, necessary condition and the alternating form, with the implications checked."""
    result = splitting_test(ob, budget)
    necessary, _ = necessary_test(ob, budget)
    form = antisymmetry_invariant(ob)
    if isinstance(result, Split) and not necessary:
        raise VerificationFailed("split obstruction fails the necessary condition")
    Q = ob.section.quotient.quot
    if form.any() and Q.is_abelian() and ob.flow_Q.action.is_trivial() and necessary:
        raise VerificationFailed("nonzero alternating form but the necessary condition holds")
    return {
        "verdict": result.verdict,
        "necessary": necessary,
        "alternating_nonzero": bool(form.any()),
        "candidates": result.candidates if isinstance(result, Obstructed) else result.candidates_scanned,
        "split": result if isinstance(result, Split) else None,
    }
