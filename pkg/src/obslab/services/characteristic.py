"""Characteristic cocycles (lambda, mu) over (H x Z, L, A).

Every table is indexed by positions in L (0 = identity) and, for lambda, by
elements of H. The flow part is stored at s = 1:

    lambda(m; g, s) = lamH(m; g) + alpha_g([s]_theta lamT(g^-1 m g))

Validity is the statement that E = A x_mu L carries an action of H x Z with
alpha_(g,s)(s_E(m)) = lambda(g m g^-1; g, s) + s_E(g m g^-1). Every axiom is
linear in (mu, lamH, lamT), so the checks run on batches with a leading axis.
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from ..errors import (
    FlowPartNotCobounding,
    InvalidAction,
    InvalidCochain,
    InvalidTable,
    InvalidXi,
    NotInZLM,
    NotSubgroup,
    VerificationFailed,
    ensure_budget,
)
from ..log import logger
from .cochains import Cochain, coboundary_tables, coord_moduli, coords_to_tables, is_cocycle, tables_to_coords
from .groups import FiniteGroup, NormalSubgroup
from .linalg import CongruenceSystem, matrix_of
from .modules import FlowModule
from .standard import StandardTwo


@dataclass(frozen=True, eq=False)
class CharContext:
    """H, a normal subgroup L acting trivially on A, and the coefficients."""

    flow: FlowModule
    L: NormalSubgroup

    @classmethod
    def build(cls, flow: FlowModule, L: NormalSubgroup) -> "CharContext":
        if L.parent is not flow.group:
            raise NotSubgroup("L must be a normal subgroup of the acting group")
        if not flow.action.trivial_on(L.members):
            bad = next(m for m in L.members if not (flow.action.auts[m] == flow.action.auts[0]).all())
            raise InvalidAction("L must act trivially on the coefficients", witness={"m": int(bad)})
        return cls(flow=flow, L=L)

    @property
    def H(self) -> FiniteGroup:
        return self.flow.group

    @property
    def nL(self) -> int:
        return self.L.order

    @property
    def nH(self) -> int:
        return self.flow.group.order

    @property
    def r(self) -> int:
        return self.flow.rank

    @cached_property
    def Lidx(self) -> np.ndarray:
        return self.L.index_array

    @cached_property
    def Lmul(self) -> np.ndarray:
        return self.L.as_group.mul

    @cached_property
    def cpos(self) -> np.ndarray:
        """cpos[g, i] = position of g m_i g^-1."""
        return self.L.positions[self.H.conjugation_table()[:, self.Lidx]]

    @cached_property
    def cinv(self) -> np.ndarray:
        """cinv[g, i] = position of g^-1 m_i g."""
        return self.cpos[self.H.inv]

    @cached_property
    def n_coords(self) -> Tuple[int, int, int]:
        return (self.nL - 1) ** 2 * self.r, (self.nL - 1) * (self.nH - 1) * self.r, (self.nL - 1) * self.r

    @cached_property
    def coord_moduli(self) -> np.ndarray:
        return np.tile(self.flow.module.mod, sum(self.n_coords) // max(self.r, 1))

    def same_as(self, other: "CharContext") -> bool:
        return self.flow is other.flow and self.L.members == other.L.members

    @cached_property
    def systems(self) -> Dict[str, CongruenceSystem]:
        return {}

    def pack(self, mu: np.ndarray, lamH: np.ndarray, lamT: np.ndarray) -> np.ndarray:
        """Batched (K, ...) tables -> (K, coords)."""
        K = mu.shape[0]
        return np.hstack([mu[:, 1:, 1:].reshape(K, -1), lamH[:, 1:, 1:].reshape(K, -1), lamT[:, 1:].reshape(K, -1)])

    def unpack(self, coords: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        coords = np.asarray(coords, dtype=np.int64)
        K = coords.shape[0]
        a, b, _ = self.n_coords
        nL, nH, r = self.nL, self.nH, self.r
        mu = np.zeros((K, nL, nL, r), dtype=np.int64)
        lamH = np.zeros((K, nL, nH, r), dtype=np.int64)
        lamT = np.zeros((K, nL, r), dtype=np.int64)
        mu[:, 1:, 1:] = coords[:, :a].reshape(K, nL - 1, nL - 1, r)
        lamH[:, 1:, 1:] = coords[:, a:a + b].reshape(K, nL - 1, nH - 1, r)
        lamT[:, 1:] = coords[:, a + b:].reshape(K, nL - 1, r)
        mod = self.flow.module.mod
        return mu % mod, lamH % mod, lamT % mod


@dataclass(frozen=True, eq=False)
class CharacteristicCocycle:
    ctx: CharContext
    mu: np.ndarray
    lamH: np.ndarray
    lamT: np.ndarray

    @classmethod
    def trivial(cls, ctx: CharContext) -> "CharacteristicCocycle":
        return cls(ctx=ctx,
                   mu=np.zeros((ctx.nL, ctx.nL, ctx.r), dtype=np.int64),
                   lamH=np.zeros((ctx.nL, ctx.nH, ctx.r), dtype=np.int64),
                   lamT=np.zeros((ctx.nL, ctx.r), dtype=np.int64))

    @classmethod
    def from_tables(cls, ctx: CharContext, mu: np.ndarray, lamH: np.ndarray, lamT: np.ndarray) -> "CharacteristicCocycle":
        mod = ctx.flow.module.mod
        shapes = {"mu": (ctx.nL, ctx.nL, ctx.r), "lamH": (ctx.nL, ctx.nH, ctx.r), "lamT": (ctx.nL, ctx.r)}
        arrays = {"mu": mu, "lamH": lamH, "lamT": lamT}
        for name, shape in shapes.items():
            if np.shape(arrays[name]) != shape:
                raise InvalidCochain(f"{name} needs shape {shape}, got {np.shape(arrays[name])}")
        return cls(ctx=ctx, mu=np.asarray(mu, dtype=np.int64) % mod,
                   lamH=np.asarray(lamH, dtype=np.int64) % mod, lamT=np.asarray(lamT, dtype=np.int64) % mod)

    @property
    def flow(self) -> FlowModule:
        return self.ctx.flow

    def coords(self) -> np.ndarray:
        return self.ctx.pack(self.mu[None], self.lamH[None], self.lamT[None])[0]

    def lam(self, s: int) -> np.ndarray:
        """Full lambda(m; g, s) as a (|L|, |H|, r) table."""
        return _full_lambda(self.ctx, self.lamH[None], self.lamT[None], s)[0]

    def mu_value(self, m: int, n: int) -> np.ndarray:
        pos = self.ctx.L.positions
        return self.mu[pos[m], pos[n]]

    def lamH_value(self, m: int, g: int) -> np.ndarray:
        return self.lamH[self.ctx.L.positions[m], g]

    def lamT_value(self, m: int) -> np.ndarray:
        return self.lamT[self.ctx.L.positions[m]]

    def equals(self, other: "CharacteristicCocycle") -> bool:
        return bool((self.mu == other.mu).all() and (self.lamH == other.lamH).all() and (self.lamT == other.lamT).all())


def _full_lambda(ctx: CharContext, lamH: np.ndarray, lamT: np.ndarray, s: int) -> np.ndarray:
    flow = ctx.flow
    inner = flow.bracket(s, lamT)                                      # (K, nL, r)
    moved = np.einsum("gab,kgxb->kxga", flow.action.auts, inner[:, ctx.cinv])
    return (lamH + moved) % flow.module.mod


# ------------------------------------------------------------------ axioms

def _residuals(ctx: CharContext, mu: np.ndarray, lamH: np.ndarray, lamT: np.ndarray, window: int = 1) -> Iterator[Tuple[str, Tuple[str, ...], np.ndarray]]:
    """Yield (axiom, index names, residual of shape (K, indices..., r)) in checking order."""
    flow = ctx.flow
    H = ctx.H
    auts = flow.action.auts
    mod = flow.module.mod
    ar_L = np.arange(ctx.nL)
    ar_H = np.arange(ctx.nH)
    Lmul, cpos, cinv = ctx.Lmul, ctx.cpos, ctx.cinv

    yield "normalization", ("n",), mu[:, 0] % mod
    yield "normalization", ("m",), mu[:, :, 0] % mod
    yield "normalization", ("g",), lamH[:, 0] % mod
    yield "normalization", ("m",), lamH[:, :, 0] % mod
    yield "normalization", ("m",), lamT[:, :1] % mod

    I, J, Kk = ar_L[:, None, None], ar_L[None, :, None], ar_L[None, None, :]
    yield "mu-cocycle", ("m", "n", "k"), (mu[:, J, Kk] - mu[:, Lmul[I, J], Kk] + mu[:, I, Lmul[J, Kk]] - mu[:, I, J]) % mod

    G, I2, J2 = ar_H[:, None, None], ar_L[None, :, None], ar_L[None, None, :]
    term = np.einsum("gab,kijb->kgija", auts, mu)
    term = term + lamH[:, cpos[G, Lmul[I2, J2]], G] - lamH[:, cpos[G, I2], G] - lamH[:, cpos[G, J2], G]
    term = term - mu[:, cpos[G, I2], cpos[G, J2]]
    yield "automorphism", ("g", "m", "n"), term % mod

    lin = np.einsum("ab,kijb->kija", flow.theta_minus_one, mu)
    yield "flow-automorphism", ("m", "n"), (lin + lamT[:, Lmul] - lamT[:, :, None] - lamT[:, None, :]) % mod

    G3, H3, I3 = ar_H[:, None, None], ar_H[None, :, None], ar_L[None, None, :]
    GH = H.mul[G3, H3]
    inner = lamH[:, cpos[ar_H[:, None], ar_L[None, :]], ar_H[:, None]]              # (K, h, i, r)
    moved = np.einsum("gab,khib->kghia", auts, inner)
    yield "homomorphism", ("g", "h", "m"), (lamH[:, cpos[GH, I3], GH] - moved - lamH[:, cpos[GH, I3], G3]) % mod

    left = np.einsum("ab,kxgb->kgxa", flow.theta_minus_one, lamH)
    right = np.einsum("gab,kgxb->kgxa", auts, lamT[:, cinv]) - lamT[:, None, :, :]
    yield "flow-commutation", ("g", "m"), (left - right) % mod

    fulls = {s: _full_lambda(ctx, lamH, lamT, s) for s in range(-2 * window, 2 * window + 1)}
    for s in range(-window, window + 1):
        alpha = np.einsum("gab,bc->gac", auts, flow.theta.power(s).matrix) % mod[None, :, None]
        for t in range(-window, window + 1):
            whole = fulls[s + t][:, cpos[GH, I3], GH]
            first = fulls[t][:, cpos[ar_H[:, None], ar_L[None, :]], ar_H[:, None]]      # lambda(h m h^-1; h, t)
            first = np.einsum("gab,khib->kghia", alpha, first)
            second = fulls[s][:, cpos[GH, I3], G3]
            yield "factorization", ("g", "h", "m"), (whole - first - second) % mod

    N, X = ar_L[:, None], ar_L[None, :]
    Nh = ctx.Lidx[N]
    yield "inner", ("n", "m"), (lamH[:, X, Nh] - mu[:, N, cinv[Nh, X]] + mu[:, X, N]) % mod


def _describe_failure(ctx: CharContext, axiom: str, names: Tuple[str, ...], index: List[int]) -> Dict:
    out: Dict = {"axiom": axiom}
    for name, value in zip(names, index):
        # L-indexed names report H elements
        out[name] = int(ctx.Lidx[value]) if name in ("m", "n", "k") else int(value)
    return out


def validate(chi: CharacteristicCocycle, window: int = 1) -> Tuple[bool, Optional[Dict]]:
    """(True, None) or (False, first violated axiom with its witnessing tuple)."""
    ctx = chi.ctx
    for axiom, names, residual in _residuals(ctx, chi.mu[None], chi.lamH[None], chi.lamT[None], window):
        bad = np.argwhere(residual[0].any(axis=-1))
        if len(bad):
            return False, _describe_failure(ctx, axiom, names, bad[0].tolist())
    return True, None


def valid_mask(ctx: CharContext, mu: np.ndarray, lamH: np.ndarray, lamT: np.ndarray, window: int = 1) -> np.ndarray:
    K = mu.shape[0]
    ok = np.ones(K, dtype=bool)
    for _, _, residual in _residuals(ctx, mu, lamH, lamT, window):
        ok &= ~residual.reshape(K, -1).any(axis=1)
    return ok


def build_characteristic(ctx: CharContext, mu: np.ndarray, lamH: np.ndarray, lamT: np.ndarray, window: int = 1) -> CharacteristicCocycle:
    chi = CharacteristicCocycle.from_tables(ctx, mu, lamH, lamT)
    ok, failure = validate(chi, window)
    if not ok:
        raise InvalidCochain("not a characteristic cocycle", witness=failure)
    return chi


# ------------------------------------------------------------------ twisted extension

@dataclass(frozen=True, eq=False)
class TwistedExtension:
    """E = A x_mu L, element (a, m) at index pos(m) * |A| + code(a)."""

    chi: CharacteristicCocycle
    total: FiniteGroup

    def element(self, a: np.ndarray, m: int) -> int:
        ctx = self.chi.ctx
        return int(ctx.L.positions[m] * ctx.flow.module.size + ctx.flow.module.encode(a))

    def action_permutation(self, g: int, s: int) -> np.ndarray:
        """alpha_(g,s) on E as an index permutation."""
        ctx = self.chi.ctx
        module = ctx.flow.module
        size = module.size
        elems = module.elements
        moved = ctx.flow.action.act(g, ctx.flow.theta_power(s, elems))              # (|A|, r)
        lam = self.chi.lam(s)
        perm = np.empty(self.total.order, dtype=np.int64)
        for i in range(ctx.nL):
            target = int(ctx.cpos[g, i])
            codes = module.encode(moved + lam[target, g])
            perm[i * size:(i + 1) * size] = target * size + codes
        return perm

    def section_conjugation(self, n: int) -> np.ndarray:
        """Conjugation by s_E(n) on E."""
        E = self.total
        e = self.element(np.zeros(self.chi.ctx.r, dtype=np.int64), n)
        return E.mul[E.mul[e], E.inv[e]]


def twisted_extension(chi: CharacteristicCocycle) -> TwistedExtension:
    ctx = chi.ctx
    module = ctx.flow.module
    size = module.size
    elems = module.elements
    n = ctx.nL * size
    idx = np.arange(n)
    pos, codes = idx // size, idx % size
    sums = elems[codes][:, None, :] + elems[codes][None, :, :] + chi.mu[pos[:, None], pos[None, :]]
    table = ctx.Lmul[pos[:, None], pos[None, :]] * size + module.encode(sums)
    total = FiniteGroup.from_table(table, label="E")
    return TwistedExtension(chi=chi, total=total)


def validate_by_permutations(chi: CharacteristicCocycle) -> Tuple[bool, Optional[Dict]]:
    """Brute-force validity: H x {0,1} acts on E by automorphisms composing like H x Z, L acting by inner conjugation."""
    ctx = chi.ctx
    try:
        ext = twisted_extension(chi)
    except InvalidTable as e:
        return False, {"axiom": "extension", "detail": str(e)}
    E = ext.total
    perms = {(g, s): ext.action_permutation(g, s) for g in range(ctx.nH) for s in (0, 1, 2)}
    for (g, s), perm in perms.items():
        if s == 2:
            continue
        if sorted(perm.tolist()) != list(range(E.order)):
            return False, {"axiom": "bijective", "g": g, "s": s}
        if not (perm[E.mul] == E.mul[perm[:, None], perm[None, :]]).all():
            return False, {"axiom": "automorphism", "g": g, "s": s}
    for g in range(ctx.nH):
        for s in (0, 1):
            for h in range(ctx.nH):
                for t in (0, 1):
                    composed = perms[(g, s)][perms[(h, t)]]
                    if not (composed == perms[(int(ctx.H.mul[g, h]), s + t)]).all():
                        return False, {"axiom": "homomorphism", "first": [g, s], "second": [h, t]}
    for n in ctx.L.members:
        if not (perms[(n, 0)] == ext.section_conjugation(n)).all():
            return False, {"axiom": "inner", "n": int(n)}
    return True, None


# ------------------------------------------------------------------ K(chi) and the subgroup condition

def compute_K(chi: CharacteristicCocycle) -> NormalSubgroup:
    ctx = chi.ctx
    members = [int(m) for i, m in enumerate(ctx.Lidx) if ctx.flow.is_flow_coboundary(chi.lamT[i])]
    return NormalSubgroup.build(ctx.H, members)


def _strict_failures(ctx: CharContext, M: NormalSubgroup, mu: np.ndarray, lamH: np.ndarray, lamT: np.ndarray) -> List[Tuple[str, np.ndarray]]:
    """Per condition, a (K,) mask of batch entries that fail it."""
    flow = ctx.flow
    mpos = ctx.L.positions[M.index_array]
    K = mu.shape[0]
    flow_fail = lamT[:, mpos].reshape(K, -1).any(axis=1)
    mu_fail = ~flow.in_torus(mu[:, mpos[:, None], mpos[None, :]]).reshape(K, -1).all(axis=1)
    lam_fail = ~flow.in_torus(lamH[:, mpos]).reshape(K, -1).all(axis=1)
    return [("flow-part", flow_fail), ("mu-torus", mu_fail), ("lambda-torus", lam_fail)]


def _check_M(ctx: CharContext, M: NormalSubgroup) -> None:
    if M.parent is not ctx.H or not M.is_subset(ctx.L):
        raise NotSubgroup("M must be a normal subgroup of H contained in L")


def in_ZLM(chi: CharacteristicCocycle, M: NormalSubgroup) -> Tuple[bool, Optional[Dict]]:
    """Strict membership: M in K(chi), lamT = 0 on M, mu(M x M) and lamH(M x H) in the torus."""
    ctx = chi.ctx
    _check_M(ctx, M)
    K = compute_K(chi)
    if not M.is_subset(K):
        missing = next(m for m in M.members if not K.contains(m))
        return False, {"condition": "K-contains-M", "m": int(missing)}
    for name, failed in _strict_failures(ctx, M, chi.mu[None], chi.lamH[None], chi.lamT[None]):
        if failed[0]:
            return False, {"condition": name}
    return True, None


def in_ZLM_class(chi: CharacteristicCocycle, M: NormalSubgroup, budget: int = 5_000_000) -> Optional[np.ndarray]:
    """A perturbation a: L -> A (supported on M) making chi strictly satisfy the subgroup condition, or None."""
    ctx = chi.ctx
    _check_M(ctx, M)
    module = ctx.flow.module
    m_count = M.order - 1
    total = module.size ** m_count
    ensure_budget(total * ctx.nL * ctx.nH, budget, "class-level subgroup condition search")
    mpos = ctx.L.positions[M.index_array[1:]]
    chunk = 4096
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        a = np.zeros((len(idx), ctx.nL, ctx.r), dtype=np.int64)
        rest = idx.copy()
        for j in range(m_count - 1, -1, -1):
            a[:, mpos[j]] = module.decode(rest % module.size)
            rest //= module.size
        dmu, dlamH, dlamT = perturbation_delta(ctx, a)
        failures = _strict_failures(ctx, M, chi.mu[None] + dmu, chi.lamH[None] + dlamH, chi.lamT[None] + dlamT)
        ok = np.ones(len(idx), dtype=bool)
        for _, failed in failures:
            ok &= ~failed
        hits = np.flatnonzero(ok)
        if len(hits):
            return a[hits[0]]
    return None


# ------------------------------------------------------------------ Res and perturbations

def perturbation_delta(ctx: CharContext, a: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Change of (mu, lamH, lamT) under a batch of a: L -> A, shape (K, |L|, r)."""
    flow = ctx.flow
    mod = flow.module.mod
    Lmul = ctx.Lmul
    dmu = a[:, None, :, :] - a[:, Lmul] + a[:, :, None, :]
    dlamH = np.einsum("gab,kgxb->kxga", flow.action.auts, a[:, ctx.cinv]) - a[:, :, None, :]
    dlamT = np.einsum("ab,kxb->kxa", flow.theta_minus_one, a)
    return dmu % mod, dlamH % mod, dlamT % mod


def lambda_of_two_cochain(ctx: CharContext, xi: np.ndarray) -> np.ndarray:
    """(K, |H|, |H|, r) -> (K, |L|, |H|, r): xi(g, g^-1 x g) - xi(x, g)."""
    ar_H = np.arange(ctx.nH)
    G = ar_H[None, :]
    X = np.arange(ctx.nL)[:, None]
    first = xi[:, G, ctx.Lidx[ctx.cinv[G, X]]]
    second = xi[:, ctx.Lidx[X], G]
    return (first - second) % ctx.flow.module.mod


def characteristic_from_two_cochain(ctx: CharContext, w0: np.ndarray, v: np.ndarray) -> CharacteristicCocycle:
    """lambda(m; g, s) = w0(g, g^-1 m g) - w0(m, g) + alpha_g([s] v(g^-1 m g)), mu = w0 on L x L, unvalidated."""
    mu = w0[np.ix_(ctx.Lidx, ctx.Lidx)]
    lamH = lambda_of_two_cochain(ctx, w0[None])[0]
    return CharacteristicCocycle.from_tables(ctx, mu, lamH, v[ctx.Lidx])


def res_standard_two(m: StandardTwo, L: NormalSubgroup, ctx: Optional[CharContext] = None) -> CharacteristicCocycle:
    ctx = ctx if ctx is not None else CharContext.build(m.flow, L)
    chi = characteristic_from_two_cochain(ctx, m.muH.table, m.d.table)
    ok, failure = validate(chi)
    if not ok:
        raise VerificationFailed("restriction of a standard 2-cocycle is not characteristic", witness=failure)
    return chi


def perturb(chi: CharacteristicCocycle, xi: Optional[Cochain] = None, a: Optional[np.ndarray] = None) -> CharacteristicCocycle:
    """Act by a torus-valued 2-cocycle xi on H and a normalized a: L -> A."""
    ctx = chi.ctx
    mod = ctx.flow.module.mod
    mu, lamH, lamT = chi.mu.copy(), chi.lamH.copy(), chi.lamT.copy()
    if xi is not None:
        if xi.degree != 2 or xi.flow.group is not ctx.H:
            raise InvalidXi("xi must be a 2-cochain on H")
        if not ctx.flow.in_torus(xi.table).all():
            bad = np.argwhere(~ctx.flow.in_torus(xi.table))[0].tolist()
            raise InvalidXi("xi leaves the torus", witness={"tuple": bad})
        ok, where = is_cocycle(Cochain(2, ctx.flow, xi.table))
        if not ok:
            raise InvalidXi("xi is not a cocycle", witness={"tuple": list(where)})
        mu = mu + xi.table[np.ix_(ctx.Lidx, ctx.Lidx)]
        lamH = lamH + lambda_of_two_cochain(ctx, xi.table[None])[0]
    if a is not None:
        a = np.asarray(a, dtype=np.int64).reshape(ctx.nL, ctx.r) % mod
        if a[0].any():
            raise InvalidCochain("perturbation a must vanish at the identity")
        dmu, dlamH, dlamT = perturbation_delta(ctx, a[None])
        mu, lamH, lamT = mu + dmu[0], lamH + dlamH[0], lamT + dlamT[0]
    return CharacteristicCocycle.from_tables(ctx, mu, lamH, lamT)


def normalize_flow_part(chi: CharacteristicCocycle) -> Tuple[CharacteristicCocycle, np.ndarray]:
    """An equivalent cocycle with lamT = 0, and the perturbation a used."""
    flow = chi.flow
    ok = flow.is_flow_coboundary(-chi.lamT)
    if not ok.all():
        bad = int(np.flatnonzero(~ok)[0])
        raise FlowPartNotCobounding("flow part is not a flow coboundary", witness={"m": int(chi.ctx.Lidx[bad])})
    a = flow.preimage(-chi.lamT)
    return perturb(chi, a=a), a


# ------------------------------------------------------------------ linear solves

def _perturbation_system(ctx: CharContext, budget: int) -> CongruenceSystem:
    cache = ctx.systems
    if "perturbation" not in cache:
        n_in = (ctx.nL - 1) * ctx.r
        ensure_budget(n_in * len(ctx.coord_moduli), budget, "perturbation system")

        def apply(coords: np.ndarray) -> np.ndarray:
            a = np.zeros((coords.shape[0], ctx.nL, ctx.r), dtype=np.int64)
            a[:, 1:] = coords.reshape(coords.shape[0], ctx.nL - 1, ctx.r)
            return ctx.pack(*perturbation_delta(ctx, a))

        cache["perturbation"] = CongruenceSystem(matrix_of(apply, n_in), ctx.coord_moduli, np.tile(ctx.flow.module.mod, ctx.nL - 1))
    return cache["perturbation"]


def char_class_equal(first: CharacteristicCocycle, second: CharacteristicCocycle, budget: int = 5_000_000) -> Tuple[bool, Optional[np.ndarray]]:
    """Whether second = perturb(first, a=a) for some a; returns a."""
    if not first.ctx.same_as(second.ctx):
        raise InvalidCochain("characteristic cocycles over different contexts")
    ctx = first.ctx
    system = _perturbation_system(ctx, budget)
    x = system.solve((second.coords() - first.coords()) % ctx.coord_moduli)
    if x is None:
        return False, None
    a = np.zeros((ctx.nL, ctx.r), dtype=np.int64)
    a[1:] = x.reshape(ctx.nL - 1, ctx.r)
    if not perturb(first, a=a).equals(second):
        raise VerificationFailed("class witness does not replay")
    return True, a


@dataclass(frozen=True, eq=False)
class CharClass:
    representative: CharacteristicCocycle

    def equals(self, other: "CharClass") -> bool:
        return char_class_equal(self.representative, other.representative)[0]


@dataclass(frozen=True)
class ResPreimage:
    """chi = perturb(Res(mu0), a) with mu0 a torus-valued 2-cocycle on H, stored as integers mod T."""

    mu0: np.ndarray
    a: np.ndarray


def res_preimage(chi: CharacteristicCocycle, budget: int = 5_000_000) -> Optional[ResPreimage]:
    """Solve for mu0 in Z^2(H, T) and a: L -> A. None when chi is not in the image.

    mu0 carries no flow part: Res only sees torus-valued classes of H.
    """
    ctx = chi.ctx
    flow = ctx.flow
    mod = flow.module.mod
    T = flow.torus_order
    nH, nL, r = ctx.nH, ctx.nL, ctx.r
    torus_flow = flow.torus_module()
    n_mu0, n_a = (nH - 1) ** 2, (nL - 1) * r
    rows = np.concatenate([coord_moduli(3, torus_flow), ctx.coord_moduli])
    ensure_budget((n_mu0 + n_a) * len(rows), budget, "Res preimage system")

    def apply(coords: np.ndarray) -> np.ndarray:
        K = coords.shape[0]
        mu0 = coords_to_tables(coords[:, :n_mu0], 2, torus_flow)
        a = np.zeros((K, nL, r), dtype=np.int64)
        a[:, 1:] = coords[:, n_mu0:].reshape(K, nL - 1, r)
        mu, lamH, lamT = _res_tables(ctx, mu0[..., 0], np.zeros((K, nH), dtype=np.int64))
        dmu, dlamH, dlamT = perturbation_delta(ctx, a)
        return np.hstack([
            tables_to_coords(coboundary_tables(mu0, 2, torus_flow), 3),
            ctx.pack((mu + dmu) % mod, (lamH + dlamH) % mod, (lamT + dlamT) % mod),
        ])

    col_moduli = np.concatenate([np.full(n_mu0, T, dtype=np.int64), np.tile(mod, nL - 1)])
    system = CongruenceSystem(matrix_of(apply, n_mu0 + n_a), rows, col_moduli)
    rhs = np.concatenate([np.zeros(len(rows) - len(ctx.coord_moduli), dtype=np.int64), chi.coords()])
    x = system.solve(rhs)
    if x is None:
        return None
    mu0 = coords_to_tables(x[None, :n_mu0], 2, torus_flow)[0, ..., 0]
    a = np.zeros((nL, r), dtype=np.int64)
    a[1:] = x[n_mu0:].reshape(nL - 1, r)
    if not res_of_torus_cocycle(ctx, mu0, a=a).equals(chi):
        raise VerificationFailed("Res preimage does not replay")
    return ResPreimage(mu0=mu0, a=a)


def _res_tables(ctx: CharContext, mu0: np.ndarray, d: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Batched Res of torus-valued (mu0, d) given as integers: (K, H, H), (K, H) -> (mu, lamH, lamT)."""
    flow = ctx.flow
    gen = flow.torus_generator
    mu_emb = (mu0[..., None] * gen) % flow.module.mod
    d_emb = (d[..., None] * gen) % flow.module.mod
    mu = mu_emb[:, ctx.Lidx[:, None], ctx.Lidx[None, :]]
    return mu, lambda_of_two_cochain(ctx, mu_emb), d_emb[:, ctx.Lidx]


def res_of_torus_cocycle(ctx: CharContext, mu0: np.ndarray, d: Optional[np.ndarray] = None, a: Optional[np.ndarray] = None) -> CharacteristicCocycle:
    """perturb(Res(mu0, d), a) for torus values given as integers mod the torus order."""
    mu0 = np.asarray(mu0, dtype=np.int64)
    d = np.zeros(ctx.nH, dtype=np.int64) if d is None else np.asarray(d, dtype=np.int64)
    mu, lamH, lamT = _res_tables(ctx, mu0[None], d[None])
    chi = CharacteristicCocycle.from_tables(ctx, mu[0], lamH[0], lamT[0])
    return perturb(chi, a=a) if a is not None else chi


def restrict_to(chi: CharacteristicCocycle, M: NormalSubgroup) -> CharacteristicCocycle:
    """The torus-valued cocycle over (H, M) obtained by restriction; needs the strict subgroup condition."""
    ok, failure = in_ZLM(chi, M)
    if not ok:
        raise NotInZLM("restriction needs the strict subgroup condition", witness=failure)
    ctx = chi.ctx
    torus_flow = ctx.flow.torus_module()
    sub = CharContext.build(torus_flow, M)
    mpos = ctx.L.positions[M.index_array]
    mu = ctx.flow.to_torus(chi.mu[np.ix_(mpos, mpos)])[..., None]
    lamH = ctx.flow.to_torus(chi.lamH[mpos])[..., None]
    restricted = CharacteristicCocycle.from_tables(sub, mu, lamH, np.zeros((M.order, 1), dtype=np.int64))
    ok, failure = validate(restricted)
    if not ok:
        raise VerificationFailed("restricted cocycle is not characteristic", witness=failure)
    return restricted


def enumerate_characteristic(ctx: CharContext, budget: int = 5_000_000, window: int = 1) -> List[CharacteristicCocycle]:
    """Every valid characteristic cocycle over the context, lexicographic in coordinates."""
    moduli = ctx.coord_moduli
    total = 1
    for m in moduli.tolist():
        total *= int(m)
    ensure_budget(total * ctx.nH * ctx.nH * ctx.nL, budget, "characteristic cocycle enumeration")
    found: List[CharacteristicCocycle] = []
    chunk = 1024
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        coords = np.zeros((len(idx), len(moduli)), dtype=np.int64)
        rest = idx.copy()
        for j in range(len(moduli) - 1, -1, -1):
            coords[:, j] = rest % moduli[j]
            rest //= moduli[j]
        mu, lamH, lamT = ctx.unpack(coords)
        keep = valid_mask(ctx, mu, lamH, lamT, window)
        for k in np.flatnonzero(keep):
            found.append(CharacteristicCocycle(ctx=ctx, mu=mu[k], lamH=lamH[k], lamT=lamT[k]))
    logger.info(f"{len(found)} characteristic cocycles over L of order {ctx.nL} in H of order {ctx.nH}")
    return found
