"""Normalized cochains C^n(G, A) with twisted coefficients.

A cochain of degree n is a table of shape (|G|,)*n + (r,). Its coordinates are
the entries at non-identity tuples in C order, r components per tuple; every
linear system below is written in these coordinates.
"""

import weakref
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import InvalidCochain, NotACocycle, VerificationFailed, ensure_budget
from ..log import logger
from .groups import FiniteGroup
from .linalg import CongruenceSystem, cokernel_structure, matrix_of
from .modules import FlowModule

MAX_DEGREE = 3


@dataclass(frozen=True, eq=False)
class Cochain:
    degree: int
    flow: FlowModule
    table: np.ndarray

    @classmethod
    def build(cls, degree: int, flow: FlowModule, table: np.ndarray) -> "Cochain":
        table = np.asarray(table, dtype=np.int64)
        expected = (flow.group.order,) * degree + (flow.rank,)
        if table.shape != expected:
            raise InvalidCochain(f"degree {degree} table needs shape {expected}, got {table.shape}")
        table = table % flow.module.mod
        for axis in range(degree):
            face = np.take(table, 0, axis=axis)
            if face.any():
                where = np.argwhere(face.any(axis=-1))[0].tolist()
                where.insert(axis, 0)
                raise InvalidCochain("cochain is not normalized", witness={"tuple": where})
        return cls(degree=degree, flow=flow, table=table)

    @classmethod
    def zero(cls, degree: int, flow: FlowModule) -> "Cochain":
        return cls(degree=degree, flow=flow, table=np.zeros((flow.group.order,) * degree + (flow.rank,), dtype=np.int64))

    @classmethod
    def from_entries(cls, degree: int, flow: FlowModule, entries: Dict[Tuple[int, ...], Sequence[int]]) -> "Cochain":
        """Sparse construction; unspecified tuples are zero."""
        table = np.zeros((flow.group.order,) * degree + (flow.rank,), dtype=np.int64)
        for args, value in entries.items():
            if len(args) != degree or any(not 0 <= a < flow.group.order for a in args):
                raise InvalidCochain(f"bad argument tuple {list(args)} for a degree {degree} cochain")
            table[tuple(args)] = np.asarray(value, dtype=np.int64).reshape(flow.rank)
        return cls.build(degree, flow, table)

    @classmethod
    def from_coords(cls, degree: int, flow: FlowModule, coords: np.ndarray) -> "Cochain":
        return cls(degree=degree, flow=flow, table=coords_to_tables(np.asarray(coords)[None], degree, flow)[0])

    @property
    def group(self) -> FiniteGroup:
        return self.flow.group

    def coords(self) -> np.ndarray:
        return self.table[(slice(1, None),) * self.degree].reshape(-1)

    def value(self, *args: int) -> np.ndarray:
        return self.table[tuple(args)]

    def is_zero(self) -> bool:
        return not self.table.any()

    def equals(self, other: "Cochain") -> bool:
        return self.degree == other.degree and bool((self.table == other.table).all())

    def __add__(self, other: "Cochain") -> "Cochain":
        return Cochain(self.degree, self.flow, (self.table + other.table) % self.flow.module.mod)

    def __sub__(self, other: "Cochain") -> "Cochain":
        return Cochain(self.degree, self.flow, (self.table - other.table) % self.flow.module.mod)

    def __neg__(self) -> "Cochain":
        return Cochain(self.degree, self.flow, (-self.table) % self.flow.module.mod)

    def scale(self, k: int) -> "Cochain":
        return Cochain(self.degree, self.flow, (k * self.table) % self.flow.module.mod)

    def entries(self) -> List[Tuple[Tuple[int, ...], List[int]]]:
        """Nonzero entries in lexicographic order."""
        nz = np.argwhere(self.table.any(axis=-1)) if self.degree else ([()] if self.table.any() else [])
        return [(tuple(int(a) for a in args), self.table[tuple(args)].tolist()) for args in nz]


def coords_to_tables(coords: np.ndarray, degree: int, flow: FlowModule) -> np.ndarray:
    n, r = flow.group.order, flow.rank
    coords = np.asarray(coords, dtype=np.int64)
    batch = coords.shape[0]
    tables = np.zeros((batch,) + (n,) * degree + (r,), dtype=np.int64)
    tables[(slice(None),) + (slice(1, None),) * degree] = coords.reshape((batch,) + (n - 1,) * degree + (r,))
    return tables % flow.module.mod


def tables_to_coords(tables: np.ndarray, degree: int) -> np.ndarray:
    return tables[(slice(None),) + (slice(1, None),) * degree].reshape(tables.shape[0], -1)


def coord_moduli(degree: int, flow: FlowModule) -> np.ndarray:
    return np.tile(flow.module.mod, (flow.group.order - 1) ** degree)


def coboundary_tables(tables: np.ndarray, degree: int, flow: FlowModule) -> np.ndarray:
    """Batched twisted coboundary: (K,) + G^n + (r,) -> (K,) + G^(n+1) + (r,)."""
    G = flow.group
    mod = flow.module.mod
    tables = np.asarray(tables, dtype=np.int64)
    auts = flow.action.auts

    if degree == 0:
        return (np.einsum("gij,bj->bgi", auts, tables) - tables[:, None, :]) % mod

    # alpha_{g0} c(g1..gn)
    out = np.einsum("gij,b...j->bg...i", auts, tables)

    axes = [np.arange(G.order).reshape((1,) * k + (G.order,) + (1,) * (degree - k)) for k in range(degree + 1)]
    for i in range(1, degree + 1):
        args = axes[:i - 1] + [G.mul[axes[i - 1], axes[i]]] + axes[i + 1:]
        face = tables[(slice(None),) + tuple(args)]
        out = out + face if i % 2 == 0 else out - face

    last = np.expand_dims(tables, axis=1 + degree)
    out = out + last if (degree + 1) % 2 == 0 else out - last
    return out % mod


def coboundary(c: Cochain) -> Cochain:
    return Cochain(degree=c.degree + 1, flow=c.flow, table=coboundary_tables(c.table[None], c.degree, c.flow)[0])


def is_cocycle(c: Cochain) -> Tuple[bool, Optional[Tuple[int, ...]]]:
    """(True, None) or (False, first tuple where the coboundary is nonzero)."""
    d = coboundary(c).table
    bad = np.argwhere(d.any(axis=-1))
    if len(bad):
        return False, tuple(int(v) for v in bad[0])
    return True, None


# ------------------------------------------------------------------ linear systems

_SYSTEMS: "weakref.WeakKeyDictionary[FlowModule, Dict[int, CongruenceSystem]]" = weakref.WeakKeyDictionary()


def coboundary_system(flow: FlowModule, degree: int, budget: int = 5_000_000) -> CongruenceSystem:
    """The coordinate matrix of C^degree -> C^(degree+1), cached per flow module."""
    cache = _SYSTEMS.setdefault(flow, {})
    if degree not in cache:
        n, r = flow.group.order, flow.rank
        n_in = (n - 1) ** degree * r
        n_out = (n - 1) ** (degree + 1) * r
        ensure_budget(n_in * n_out, budget, f"degree {degree} coboundary matrix")

        def apply(coords: np.ndarray) -> np.ndarray:
            return tables_to_coords(coboundary_tables(coords_to_tables(coords, degree, flow), degree, flow), degree + 1)

        matrix = matrix_of(apply, n_in)
        cache[degree] = CongruenceSystem(matrix, coord_moduli(degree + 1, flow), coord_moduli(degree, flow))
        logger.debug(f"coboundary matrix of degree {degree} on a group of order {n}: {n_out} x {n_in}")
    return cache[degree]


def is_coboundary(z: Cochain, budget: int = 5_000_000) -> Optional[Cochain]:
    """A witness b with coboundary(b) = z, or None."""
    if z.degree == 0:
        raise InvalidCochain("degree 0 cochains have no coboundary witnesses")
    ok, where = is_cocycle(z)
    if not ok:
        raise NotACocycle("cochain is not a cocycle", witness={"tuple": list(where)})
    system = coboundary_system(z.flow, z.degree - 1, budget)
    x = system.solve(z.coords())
    if x is None:
        return None
    witness = Cochain.from_coords(z.degree - 1, z.flow, x)
    if not coboundary(witness).equals(z):
        raise VerificationFailed("coboundary witness does not reproduce the cocycle", witness={"degree": z.degree})
    return witness


def cohomologous(first: Cochain, second: Cochain, budget: int = 5_000_000) -> Optional[Cochain]:
    """Witness b with first - second = coboundary(b), or None."""
    return is_coboundary(first - second, budget)


@dataclass(frozen=True)
class CohomologyGroup:
    degree: int
    invariant_factors: Tuple[int, ...]
    basis: Tuple[Cochain, ...]

    @property
    def order(self) -> int:
        return int(np.prod(self.invariant_factors)) if self.invariant_factors else 1

    def describe(self) -> str:
        return " + ".join(f"Z/{f}" for f in self.invariant_factors) if self.invariant_factors else "0"


def cocycle_generators(flow: FlowModule, degree: int, budget: int = 5_000_000) -> np.ndarray:
    if degree > MAX_DEGREE:
        raise InvalidCochain(f"degree {degree} is above the supported maximum {MAX_DEGREE}")
    return coboundary_system(flow, degree, budget).kernel_generators()


def cohomology(flow: FlowModule, degree: int, budget: int = 5_000_000) -> CohomologyGroup:
    """H^degree(G, A) as invariant factors with representative cocycles."""
    if not 0 <= degree <= MAX_DEGREE:
        raise InvalidCochain(f"degree must lie in 0..{MAX_DEGREE}, got {degree}")
    exponent = int(np.lcm.reduce(flow.module.mod)) if flow.rank else 1
    z_gens = cocycle_generators(flow, degree, budget)
    k = len(z_gens)
    if k == 0:
        return CohomologyGroup(degree=degree, invariant_factors=(), basis=())

    relations = [exponent * np.eye(k, dtype=np.int64)]
    if degree > 0:
        lower = coboundary_system(flow, degree - 1, budget)
        ensure_budget(lower.shape[0] * (k + lower.shape[1]), budget, "cohomology relation system")
        combined = np.hstack([z_gens.T, -lower.matrix])
        col_moduli = np.concatenate([np.full(k, exponent, dtype=np.int64), lower.col_moduli])
        joint = CongruenceSystem(combined, lower.row_moduli, col_moduli)
        kernel = joint.kernel_generators()
        if len(kernel):
            relations.append(kernel[:, :k])
    orders, coeffs = cokernel_structure(np.vstack(relations), exponent)

    moduli = coord_moduli(degree, flow)
    basis = []
    for coeff in coeffs:
        coords = (np.asarray(coeff, dtype=np.int64) @ z_gens) % moduli
        basis.append(Cochain.from_coords(degree, flow, coords))
    group = CohomologyGroup(degree=degree, invariant_factors=tuple(int(o) for o in orders), basis=tuple(basis))
    logger.info(f"H^{degree} over {flow.group.label} with coefficients {flow.module.describe()}: {group.describe()}")
    return group


# ------------------------------------------------------------------ enumeration

def _coords_from_indices(indices: np.ndarray, moduli: np.ndarray) -> np.ndarray:
    """Mixed-radix digits, first coordinate most significant."""
    out = np.zeros((len(indices), len(moduli)), dtype=np.int64)
    rest = indices.copy()
    for j in range(len(moduli) - 1, -1, -1):
        out[:, j] = rest % moduli[j]
        rest //= moduli[j]
    return out


def _space_size(moduli: np.ndarray) -> int:
    size = 1
    for m in moduli.tolist():
        size *= int(m)
    return size


def iter_cochain_batches(degree: int, flow: FlowModule, budget: int, chunk: int = 4096) -> Iterator[np.ndarray]:
    moduli = coord_moduli(degree, flow)
    total = _space_size(moduli)
    ensure_budget(total, budget, f"enumeration of degree {degree} cochains")
    for start in range(0, total, chunk):
        yield _coords_from_indices(np.arange(start, min(start + chunk, total), dtype=np.int64), moduli)


def enumerate_cocycles(flow: FlowModule, degree: int, budget: int = 5_000_000) -> Iterator[Cochain]:
    """Every normalized cocycle, lexicographic in coordinates."""
    for batch in iter_cochain_batches(degree, flow, budget):
        d = coboundary_tables(coords_to_tables(batch, degree, flow), degree, flow)
        keep = ~d.reshape(len(batch), -1).any(axis=1)
        for coords in batch[keep]:
            yield Cochain.from_coords(degree, flow, coords)


def brute_force_order(flow: FlowModule, degree: int, budget: int = 5_000_000) -> Tuple[int, int]:
    """(|Z^n|, |B^n|) by exhaustive enumeration."""
    z_count = 0
    for batch in iter_cochain_batches(degree, flow, budget):
        d = coboundary_tables(coords_to_tables(batch, degree, flow), degree, flow)
        z_count += int((~d.reshape(len(batch), -1).any(axis=1)).sum())
    if degree == 0:
        return z_count, 1
    images = set()
    for batch in iter_cochain_batches(degree - 1, flow, budget):
        d = coboundary_tables(coords_to_tables(batch, degree - 1, flow), degree - 1, flow)
        images.update(map(bytes, tables_to_coords(d, degree).astype(np.int64)))
    return z_count, len(images)


def coboundary_by_search(z: Cochain, budget: int = 5_000_000) -> Optional[Cochain]:
    """Exhaustive search for a coboundary witness, first in lexicographic order."""
    target = z.coords()
    for batch in iter_cochain_batches(z.degree - 1, z.flow, budget):
        d = tables_to_coords(coboundary_tables(coords_to_tables(batch, z.degree - 1, z.flow), z.degree - 1, z.flow), z.degree)
        hit = np.flatnonzero((d == target[None, :]).all(axis=1))
        if len(hit):
            return Cochain.from_coords(z.degree - 1, z.flow, batch[hit[0]])
    return None


# ------------------------------------------------------------------ helpers

def random_cochain(degree: int, flow: FlowModule, rng: np.random.Generator) -> Cochain:
    moduli = coord_moduli(degree, flow)
    coords = rng.integers(0, moduli) if len(moduli) else np.zeros(0, dtype=np.int64)
    return Cochain.from_coords(degree, flow, coords)


def pullback(c: Cochain, flow: FlowModule, hom: np.ndarray) -> Cochain:
    """c composed with a group homomorphism `hom` (array from flow.group into c.group)."""
    hom = np.asarray(hom, dtype=np.int64)
    if c.degree == 0:
        return Cochain(degree=0, flow=flow, table=c.table.copy())
    n = flow.group.order
    axes = [hom.reshape((1,) * k + (n,) + (1,) * (c.degree - k - 1)) for k in range(c.degree)]
    return Cochain(degree=c.degree, flow=flow, table=c.table[tuple(axes)])
