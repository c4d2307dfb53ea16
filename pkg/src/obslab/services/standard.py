"""Standard 2- and 3-cocycles on G x Z.

A standard cocycle is stored by its pure part on G and its flow part at s = 1;
values at other flow parameters come from the Z-cocycle expansion [s]_theta.
Window checks evaluate the full cocycle identities on tuples whose flow
components lie in {-W..W}.
"""

import weakref
from dataclasses import dataclass
from typing import Dict, Optional, Tuple

import numpy as np

from ..errors import InvalidCochain, NotACocycle, NotNormalizedOnFlow, VerificationFailed, ensure_budget
from ..log import logger
from .cochains import (
    Cochain,
    coboundary,
    coboundary_tables,
    coord_moduli,
    coords_to_tables,
    is_cocycle,
    tables_to_coords,
)
from .linalg import CongruenceSystem, matrix_of
from .modules import FlowModule


def flow_linear(flow: FlowModule, tables: np.ndarray) -> np.ndarray:
    """(theta - 1) applied entrywise."""
    return (tables @ flow.theta_minus_one.T) % flow.module.mod


# ------------------------------------------------------------------ degree two

@dataclass(frozen=True, eq=False)
class StandardTwo:
    flow: FlowModule
    muH: Cochain
    d: Cochain

    @property
    def base(self):
        return self.flow.group

    def expand(self, h: int, s: int, k: int, t: int = 0) -> np.ndarray:
        """Value at ((h, s), (k, t))."""
        inner = self.flow.bracket(s, self.d.table[k])
        return (self.muH.table[h, k] + self.flow.action.act(h, inner)) % self.flow.module.mod

    def expansion_table(self, s_range: int) -> np.ndarray:
        """Y[h, s + s_range, k] for |s| <= s_range."""
        return _expand_two(self.flow, self.muH.table, self.d.table, s_range)

    def __add__(self, other: "StandardTwo") -> "StandardTwo":
        return StandardTwo(self.flow, self.muH + other.muH, self.d + other.d)

    def __sub__(self, other: "StandardTwo") -> "StandardTwo":
        return StandardTwo(self.flow, self.muH - other.muH, self.d - other.d)


def _expand_two(flow: FlowModule, mu: np.ndarray, d: np.ndarray, s_range: int) -> np.ndarray:
    n = flow.group.order
    out = np.empty((n, 2 * s_range + 1, n, flow.rank), dtype=np.int64)
    for idx, s in enumerate(range(-s_range, s_range + 1)):
        inner = flow.bracket(s, d)                                  # (k, r)
        out[:, idx] = mu + flow.action.act(np.arange(n)[:, None], np.broadcast_to(inner, (n,) + inner.shape))
    return out % flow.module.mod


def validate_standard_two(m: StandardTwo) -> Tuple[bool, Optional[Dict]]:
    ok, where = is_cocycle(m.muH)
    if not ok:
        return False, {"axiom": "cocycle", "tuple": list(where)}
    if m.d.table[0].any():
        return False, {"axiom": "normalized", "tuple": [0]}
    diff = (flow_linear(m.flow, m.muH.table) - coboundary(m.d).table) % m.flow.module.mod
    bad = np.argwhere(diff.any(axis=-1))
    if len(bad):
        return False, {"axiom": "linkage", "tuple": bad[0].tolist()}
    return True, None


def build_standard_two(flow: FlowModule, muH: Cochain, d: Cochain) -> StandardTwo:
    m = StandardTwo(flow=flow, muH=muH, d=d)
    ok, failure = validate_standard_two(m)
    if not ok:
        raise InvalidCochain("not a standard 2-cocycle", witness=failure)
    return m


def standardize_two(table: np.ndarray, flow: FlowModule) -> Tuple[StandardTwo, np.ndarray]:
    """Standard form of a 2-cocycle given on the window (H x S)^2, S = {-B..B}.

    `table` has shape (|H|, 2B+1, |H|, 2B+1, r), flow index s + B. Returns the
    standard cocycle and the witness b (shape (|H|, 2B+1, r)) with
    m + coboundary(b) standard on every pair whose product stays in the window.
    """
    table = np.asarray(table, dtype=np.int64) % flow.module.mod
    n = flow.group.order
    width = table.shape[1]
    bound = (width - 1) // 2
    if table.shape != (n, width, n, width, flow.rank) or width % 2 == 0 or bound < 1:
        raise InvalidCochain(f"window table needs shape (|H|, 2B+1, |H|, 2B+1, r) with B >= 1, got {table.shape}")
    flow_block = table[0, :, 0, :]
    if flow_block.any():
        s, t = np.argwhere(flow_block.any(axis=-1))[0]
        raise NotNormalizedOnFlow("cochain does not vanish on the flow part", witness={"s": int(s) - bound, "t": int(t) - bound})
    failure = _window_cocycle_failure_two(table, flow, bound)
    if failure is not None:
        raise NotACocycle("window table is not a 2-cocycle", witness=failure)

    muH = Cochain.build(2, flow, table[:, bound, :, bound])
    d = Cochain.build(1, flow, table[0, bound + 1, :, bound] - table[:, bound, 0, bound + 1])
    m = StandardTwo(flow=flow, muH=muH, d=d)
    ok, problem = validate_standard_two(m)
    if not ok:
        raise VerificationFailed("standardized cochain fails the standard identities", witness=problem)

    witness = table[:, bound, 0, :]                            # b(h, s) = m((h, 0), (1, s))
    adjusted = _add_window_coboundary(table, witness, flow, bound)
    expected = m.expansion_table(bound)
    for h, s, k, t in _window_pairs(n, bound):
        if (adjusted[h, s + bound, k, t + bound] != expected[h, s + bound, k]).any():
            raise VerificationFailed("standard form does not match the adjusted cocycle",
                                     witness={"pair": [h, s, k, t]})
    return m, witness


def _window_pairs(n: int, bound: int):
    for h in range(n):
        for s in range(-bound, bound + 1):
            for k in range(n):
                for t in range(-bound, bound + 1):
                    if abs(s + t) <= bound:
                        yield h, s, k, t


def _add_window_coboundary(table: np.ndarray, b: np.ndarray, flow: FlowModule, bound: int) -> np.ndarray:
    """m + coboundary(b) on pairs with |s + t| <= B; other pairs are left untouched."""
    G = flow.group
    out = table.copy()
    for h, s, k, t in _window_pairs(G.order, bound):
        act = flow.action.act(h, flow.theta_power(s, b[k, t + bound]))
        out[h, s + bound, k, t + bound] += act - b[G.mul[h, k], s + t + bound] + b[h, s + bound]
    return out % flow.module.mod


def _window_cocycle_failure_two(table: np.ndarray, flow: FlowModule, bound: int) -> Optional[Dict]:
    G = flow.group
    mod = flow.module.mod
    ns = range(-bound, bound + 1)
    for h0 in range(G.order):
        for s0 in ns:
            alpha = (flow.action.auts[h0] @ flow.theta.power(s0).matrix) % mod[:, None]
            for h1 in range(G.order):
                for s1 in ns:
                    if abs(s0 + s1) > bound:
                        continue
                    for h2 in range(G.order):
                        for s2 in ns:
                            if abs(s1 + s2) > bound:
                                continue
                            value = (alpha @ table[h1, s1 + bound, h2, s2 + bound]
                                     - table[G.mul[h0, h1], s0 + s1 + bound, h2, s2 + bound]
                                     + table[h0, s0 + bound, G.mul[h1, h2], s1 + s2 + bound]
                                     - table[h0, s0 + bound, h1, s1 + bound]) % mod
                            if value.any():
                                return {"triple": [[h0, s0], [h1, s1], [h2, s2]]}
    return None


def window_check_two(m: StandardTwo, window: int) -> Optional[Dict]:
    """First window triple where the expanded 2-cocycle identity fails."""
    Y = m.expansion_table(2 * window)
    return _window_coboundary_failure(Y, m.flow, window, degree=2)


# ------------------------------------------------------------------ degree three

@dataclass(frozen=True, eq=False)
class StandardThree:
    flow: FlowModule
    cQ: Cochain
    d1: Cochain

    @property
    def base(self):
        return self.flow.group

    def expand(self, p: int, s: int, q: int, r: int) -> np.ndarray:
        """Value at ((p, s), (q, t), (r, u)); independent of t and u."""
        inner = self.flow.bracket(s, self.d1.table[q, r])
        return (self.flow.action.act(p, inner) + self.cQ.table[p, q, r]) % self.flow.module.mod

    def expansion_table(self, s_range: int) -> np.ndarray:
        """V[p, s + s_range, q, r] for |s| <= s_range."""
        flow = self.flow
        n = flow.group.order
        out = np.empty((n, 2 * s_range + 1, n, n, flow.rank), dtype=np.int64)
        for idx, s in enumerate(range(-s_range, s_range + 1)):
            inner = flow.bracket(s, self.d1.table)                  # (q, r, r)
            moved = np.einsum("pij,qrj->pqri", flow.action.auts, inner)
            out[:, idx] = moved + self.cQ.table
        return out % flow.module.mod

    def __add__(self, other: "StandardThree") -> "StandardThree":
        return StandardThree(self.flow, self.cQ + other.cQ, self.d1 + other.d1)

    def __sub__(self, other: "StandardThree") -> "StandardThree":
        return StandardThree(self.flow, self.cQ - other.cQ, self.d1 - other.d1)

    def is_zero(self) -> bool:
        return self.cQ.is_zero() and self.d1.is_zero()


def expand_three(c: StandardThree, p: Tuple[int, int], q: Tuple[int, int], r: Tuple[int, int]) -> np.ndarray:
    return c.expand(p[0], p[1], q[0], r[0])


def validate_standard_three(c: StandardThree) -> Tuple[bool, Optional[Dict]]:
    ok, where = is_cocycle(c.cQ)
    if not ok:
        return False, {"axiom": "cocycle", "tuple": list(where)}
    diff = (flow_linear(c.flow, c.cQ.table) - coboundary(c.d1).table) % c.flow.module.mod
    bad = np.argwhere(diff.any(axis=-1))
    if len(bad):
        return False, {"axiom": "linkage", "tuple": bad[0].tolist()}
    return True, None


def build_standard_three(flow: FlowModule, cQ: Cochain, d1: Cochain) -> StandardThree:
    c = StandardThree(flow=flow, cQ=cQ, d1=d1)
    ok, failure = validate_standard_three(c)
    if not ok:
        raise InvalidCochain("not a standard 3-cocycle", witness=failure)
    return c


def standard_coboundary(a: Cochain) -> StandardThree:
    """The coboundary on Q x Z of a 2-cochain constant in the flow variable."""
    return StandardThree(flow=a.flow, cQ=coboundary(a), d1=Cochain(2, a.flow, flow_linear(a.flow, a.table)))


def window_check_three(c: StandardThree, window: int) -> Optional[Dict]:
    """First window quadruple where the expanded 3-cocycle identity fails."""
    V = c.expansion_table(2 * window)
    return _window_coboundary_failure(V, c.flow, window, degree=3)


def _window_coboundary_failure(values: np.ndarray, flow: FlowModule, window: int, degree: int,
                               target: Optional[np.ndarray] = None) -> Optional[Dict]:
    """First window tuple where the coboundary of an expanded cochain differs from `target`.

    `values` is indexed [g1, s1 + 2W, g2, ..., g_degree] and depends only on the
    flow parameter of its first argument; `target` (zero when None) is indexed
    the same way with one more group argument.
    """
    G = flow.group
    mod = flow.module.mod
    n = G.order
    span = 2 * window
    ws = np.arange(-window, window + 1)
    n_axes = 2 * degree
    gs = [np.arange(n).reshape([1] * (2 * i) + [n] + [1] * (n_axes - 2 * i - 1)) for i in range(degree)]
    ss = [ws.reshape([1] * (2 * i + 1) + [len(ws)] + [1] * (n_axes - 2 * i - 2)) for i in range(degree)]
    full = (n, len(ws)) * degree + (flow.rank,)

    def lookup(table: np.ndarray, first, rest):
        return table[(first[0], first[1] + span) + tuple(rest)]

    for g0 in range(n):
        for s0 in ws.tolist():
            alpha = (flow.action.auts[g0] @ flow.theta.power(s0).matrix) % mod[:, None]
            term = np.einsum("ij,...j->...i", alpha, lookup(values, (gs[0], ss[0]), gs[1:]))
            term = term - lookup(values, (G.mul[g0, gs[0]], s0 + ss[0]), gs[1:])
            for i in range(2, degree + 1):
                rest = gs[:i - 2] + [G.mul[gs[i - 2], gs[i - 1]]] + gs[i:]
                face = lookup(values, (g0, s0), rest)
                term = term + face if i % 2 == 0 else term - face
            last = lookup(values, (g0, s0), gs[:degree - 1])
            term = term + last if (degree + 1) % 2 == 0 else term - last
            if target is not None:
                term = term - lookup(target, (g0, s0), gs)
            term = np.broadcast_to(term, full) % mod
            bad = np.argwhere(term.any(axis=-1))
            if len(bad):
                tail = bad[0].tolist()
                args = [[g0, s0]] + [[tail[i], int(ws[tail[i + 1]])] for i in range(0, len(tail), 2)]
                return {"tuple": args}
    return None


# ------------------------------------------------------------------ linear systems

_SYSTEMS: "weakref.WeakKeyDictionary[FlowModule, Dict[str, CongruenceSystem]]" = weakref.WeakKeyDictionary()


def _cached(flow: FlowModule, key: str, build) -> CongruenceSystem:
    cache = _SYSTEMS.setdefault(flow, {})
    if key not in cache:
        cache[key] = build()
    return cache[key]


def _standard_coboundary_system(flow: FlowModule, budget: int) -> CongruenceSystem:
    """a -> (coboundary(a), (theta - 1) a) on C^2(Q, A)."""
    def build():
        n_in = len(coord_moduli(2, flow))
        rows = np.concatenate([coord_moduli(3, flow), coord_moduli(2, flow)])
        ensure_budget(n_in * len(rows), budget, "standard coboundary system")

        def apply(coords: np.ndarray) -> np.ndarray:
            tables = coords_to_tables(coords, 2, flow)
            return np.hstack([tables_to_coords(coboundary_tables(tables, 2, flow), 3),
                              tables_to_coords(flow_linear(flow, tables), 2)])

        return CongruenceSystem(matrix_of(apply, n_in), rows, coord_moduli(2, flow))
    return _cached(flow, "b3s", build)


def is_standard_coboundary(c: StandardThree, budget: int = 5_000_000) -> Optional[Cochain]:
    """A 2-cochain a on Q with coboundary(a) = cQ and (theta - 1) a = d1, or None."""
    system = _standard_coboundary_system(c.flow, budget)
    x = system.solve(np.concatenate([c.cQ.coords(), c.d1.coords()]))
    if x is None:
        return None
    a = Cochain.from_coords(2, c.flow, x)
    replay = standard_coboundary(a)
    if not (replay.cQ.equals(c.cQ) and replay.d1.equals(c.d1)):
        raise VerificationFailed("standard coboundary witness does not replay")
    return a


def standard_coboundary_batch(flow: FlowModule, cQ_coords: np.ndarray, d1_coords: np.ndarray, budget: int = 5_000_000) -> Tuple[np.ndarray, np.ndarray]:
    """Batched B^3_s membership: rows of (cQ, d1) coordinates -> (solvable mask, witnesses a as K x coords)."""
    system = _standard_coboundary_system(flow, budget)
    rhs = np.hstack([np.asarray(cQ_coords, dtype=np.int64), np.asarray(d1_coords, dtype=np.int64)])
    ok, x = system.solve_batch(rhs.T)
    return ok, x.T


def h3s_class_equal(first: StandardThree, second: StandardThree, budget: int = 5_000_000) -> Tuple[bool, Optional[Cochain]]:
    if first.flow is not second.flow:
        raise InvalidCochain("standard cocycles live over different coefficient modules")
    witness = is_standard_coboundary(first - second, budget)
    return witness is not None, witness


def _standard_cocycle_system(flow: FlowModule, degree: int, budget: int) -> CongruenceSystem:
    """(pure, flow part) -> (coboundary(pure), (theta - 1) pure - coboundary(flow part)); kernel = standard cocycles."""
    def build():
        pure_mod = coord_moduli(degree, flow)
        part_mod = coord_moduli(degree - 1, flow)
        n_in = len(pure_mod) + len(part_mod)
        rows = np.concatenate([coord_moduli(degree + 1, flow), pure_mod])
        ensure_budget(n_in * len(rows), budget, f"standard {degree}-cocycle system")

        def apply(coords: np.ndarray) -> np.ndarray:
            pure = coords_to_tables(coords[:, :len(pure_mod)], degree, flow)
            part = coords_to_tables(coords[:, len(pure_mod):], degree - 1, flow)
            linkage = flow_linear(flow, pure) - coboundary_tables(part, degree - 1, flow)
            return np.hstack([tables_to_coords(coboundary_tables(pure, degree, flow), degree + 1),
                              tables_to_coords(linkage % flow.module.mod, degree)])

        return CongruenceSystem(matrix_of(apply, n_in), rows, np.concatenate([pure_mod, part_mod]))
    return _cached(flow, f"z{degree}s", build)


def _random_kernel_element(system: CongruenceSystem, rng: np.random.Generator) -> np.ndarray:
    gens = system.kernel_generators()
    if not len(gens):
        return np.zeros(len(system.col_moduli), dtype=np.int64)
    weights = rng.integers(0, int(system.modulus), size=len(gens))
    return (weights @ gens) % system.col_moduli


def random_standard_two(flow: FlowModule, rng: np.random.Generator, budget: int = 5_000_000) -> StandardTwo:
    system = _standard_cocycle_system(flow, 2, budget)
    x = _random_kernel_element(system, rng)
    split = len(coord_moduli(2, flow))
    m = StandardTwo(flow=flow, muH=Cochain.from_coords(2, flow, x[:split]), d=Cochain.from_coords(1, flow, x[split:]))
    ok, failure = validate_standard_two(m)
    if not ok:
        raise VerificationFailed("sampled standard 2-cocycle is invalid", witness=failure)
    return m


def random_standard_three(flow: FlowModule, rng: np.random.Generator, budget: int = 5_000_000) -> StandardThree:
    system = _standard_cocycle_system(flow, 3, budget)
    x = _random_kernel_element(system, rng)
    split = len(coord_moduli(3, flow))
    c = StandardThree(flow=flow, cQ=Cochain.from_coords(3, flow, x[:split]), d1=Cochain.from_coords(2, flow, x[split:]))
    ok, failure = validate_standard_three(c)
    if not ok:
        raise VerificationFailed("sampled standard 3-cocycle is invalid", witness=failure)
    logger.debug(f"sampled a standard 3-cocycle over {flow.group.label}")
    return c


def window_coboundary_matches(f_values: np.ndarray, target: StandardThree, window: int) -> Optional[Dict]:
    """First window triple where coboundary(f) differs from the expansion of `target`.

    `f_values` is indexed [p, s + 2W, q] like a flow-expanded 2-cochain.
    """
    return _window_coboundary_failure(f_values, target.flow, window, degree=2,
                                      target=target.expansion_table(2 * window))
