"""Finite groups as dense multiplication tables.

Elements are integer indices with the identity fixed at 0. Quotients, cross
sections and their nonabelian section cocycles are built on top of the table.
"""

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import (
    InvalidSection,
    InvalidTable,
    NotNormal,
    NotSubgroup,
    VerificationFailed,
    ensure_budget,
)
from ..log import logger


@dataclass(frozen=True, eq=False)
class FiniteGroup:
    order: int
    mul: np.ndarray
    inv: np.ndarray
    label: str = "G"
    names: Tuple[str, ...] = ()

    @classmethod
    def from_table(cls, table: Sequence[Sequence[int]], label: str = "G", names: Sequence[str] = (), check_associativity: bool = True) -> "FiniteGroup":
        """Validate a multiplication table and build the group. Raises InvalidTable with the failing tuple."""
        mul = np.asarray(table, dtype=np.int64)
        if mul.ndim != 2 or mul.shape[0] != mul.shape[1] or mul.shape[0] == 0:
            raise InvalidTable(f"table must be a non-empty square matrix, got shape {mul.shape}")
        n = mul.shape[0]
        if mul.min() < 0 or mul.max() >= n:
            bad = np.argwhere((mul < 0) | (mul >= n))[0]
            raise InvalidTable("table entry out of range", witness={"entry": bad.tolist()})

        elements = np.arange(n)
        if not (mul[0] == elements).all() or not (mul[:, 0] == elements).all():
            raise InvalidTable("element 0 is not a two-sided identity")

        sorted_rows = np.sort(mul, axis=1)
        bad_rows = np.flatnonzero((sorted_rows != elements).any(axis=1))
        if len(bad_rows):
            raise InvalidTable("row is not a permutation", witness={"row": int(bad_rows[0])})
        sorted_cols = np.sort(mul, axis=0)
        bad_cols = np.flatnonzero((sorted_cols != elements[:, None]).any(axis=0))
        if len(bad_cols):
            raise InvalidTable("column is not a permutation", witness={"column": int(bad_cols[0])})

        if check_associativity:
            left = mul[mul, :]                          # (a*b)*c indexed [a, b, c]
            right = mul[elements[:, None, None], mul[None, :, :]]
            failing = np.argwhere(left != right)
            if len(failing):
                a, b, c = (int(v) for v in failing[0])
                raise InvalidTable("multiplication is not associative", witness={"triple": [a, b, c]})

        inv = np.argmin(mul != 0, axis=1).astype(np.int64)
        return cls(order=n, mul=mul, inv=inv, label=label, names=tuple(names))

    @property
    def elements(self) -> np.ndarray:
        return np.arange(self.order)

    def name(self, g: int) -> str:
        return self.names[g] if self.names else str(g)

    def conj(self, g: int, m: int) -> int:
        """g m g^-1"""
        return int(self.mul[self.mul[g, m], self.inv[g]])

    def conjugation_table(self) -> np.ndarray:
        """Array c with c[g, m] = g m g^-1."""
        return self.mul[self.mul, self.inv[:, None]]

    def element_order(self, g: int) -> int:
        k, x = 1, int(g)
        while x != 0:
            x = int(self.mul[x, g])
            k += 1
        return k

    def power(self, g: int, k: int) -> int:
        x = 0
        base = int(g) if k >= 0 else int(self.inv[g])
        for _ in range(abs(k)):
            x = int(self.mul[x, base])
        return x

    def is_abelian(self) -> bool:
        return bool((self.mul == self.mul.T).all())

    def generated_subgroup(self, generators: Sequence[int]) -> List[int]:
        members = {0}
        frontier = [0]
        gens = [int(g) for g in generators]
        while frontier:
            nxt = []
            for x in frontier:
                for g in gens:
                    y = int(self.mul[x, g])
                    if y not in members:
                        members.add(y)
                        nxt.append(y)
            frontier = nxt
        return sorted(members)

    def generators(self, members: Optional[Sequence[int]] = None) -> List[int]:
        """Greedy generating set: repeatedly add the smallest element not yet generated."""
        target = sorted(int(m) for m in (members if members is not None else self.elements))
        gens: List[int] = []
        span = {0}
        for m in target:
            if m not in span:
                gens.append(m)
                span = set(self.generated_subgroup(gens))
        return gens


@dataclass(frozen=True, eq=False)
class NormalSubgroup:
    parent: FiniteGroup
    members: Tuple[int, ...]
    positions: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, parent: FiniteGroup, members: Sequence[int]) -> "NormalSubgroup":
        """Validate closure and normality. Raises NotSubgroup or NotNormal with a witness."""
        elems = sorted({int(m) for m in members})
        if not elems or elems[0] != 0:
            raise NotSubgroup("subgroup must contain the identity 0", witness={"members": elems})
        if elems[-1] >= parent.order:
            raise NotSubgroup("member out of range", witness={"member": elems[-1]})
        mask = np.zeros(parent.order, dtype=bool)
        mask[elems] = True
        idx = np.asarray(elems)
        prods = parent.mul[np.ix_(idx, idx)]
        if not mask[prods].all():
            a, b = np.argwhere(~mask[prods])[0]
            raise NotSubgroup("not closed under multiplication", witness={"pair": [elems[a], elems[b]]})
        if not mask[parent.inv[idx]].all():
            raise NotSubgroup("not closed under inverses")
        conj = parent.conjugation_table()[:, idx]
        if not mask[conj].all():
            g, m = np.argwhere(~mask[conj])[0]
            raise NotNormal("not normal under conjugation", witness={"g": int(g), "m": elems[m]})
        positions = np.full(parent.order, -1, dtype=np.int64)
        positions[idx] = np.arange(len(elems))
        return cls(parent=parent, members=tuple(elems), positions=positions)

    @classmethod
    def trivial(cls, parent: FiniteGroup) -> "NormalSubgroup":
        return cls.build(parent, [0])

    @classmethod
    def whole(cls, parent: FiniteGroup) -> "NormalSubgroup":
        return cls.build(parent, range(parent.order))

    @classmethod
    def center(cls, parent: FiniteGroup) -> "NormalSubgroup":
        central = [g for g in range(parent.order) if (parent.mul[g] == parent.mul[:, g]).all()]
        return cls.build(parent, central)

    @property
    def order(self) -> int:
        return len(self.members)

    @property
    def index_array(self) -> np.ndarray:
        return np.asarray(self.members, dtype=np.int64)

    def contains(self, g: int) -> bool:
        return self.positions[g] >= 0

    def is_subset(self, other: "NormalSubgroup") -> bool:
        return all(other.contains(m) for m in self.members)

    @cached_property
    def as_group(self) -> FiniteGroup:
        """The subgroup as a group in its own right, element i being members[i]."""
        idx = self.index_array
        table = self.positions[self.parent.mul[np.ix_(idx, idx)]]
        names = [self.parent.name(int(m)) for m in idx] if self.parent.names else []
        return FiniteGroup(order=len(idx), mul=table, inv=self.positions[self.parent.inv[idx]],
                           label=f"sub({self.parent.label})", names=tuple(names))


@dataclass(frozen=True, eq=False)
class QuotientData:
    parent: FiniteGroup
    kernel: NormalSubgroup
    quot: FiniteGroup
    proj: np.ndarray
    reps: np.ndarray

    @classmethod
    def from_projection(cls, parent: FiniteGroup, kernel: NormalSubgroup, quot: FiniteGroup, proj: Sequence[int]) -> "QuotientData":
        """Pin a quotient map onto an existing group. The map must be a surjective homomorphism with the given kernel."""
        proj = np.asarray(proj, dtype=np.int64)
        hom = proj[parent.mul] == quot.mul[proj[:, None], proj[None, :]]
        if not hom.all():
            a, b = np.argwhere(~hom)[0]
            raise InvalidTable("projection is not a homomorphism", witness={"pair": [int(a), int(b)]})
        if sorted(np.flatnonzero(proj == 0).tolist()) != list(kernel.members):
            raise NotSubgroup("projection kernel differs from the given subgroup")
        if len(set(proj.tolist())) != quot.order:
            raise InvalidTable("projection is not surjective")
        reps = np.array([int(np.flatnonzero(proj == p)[0]) for p in range(quot.order)], dtype=np.int64)
        return cls(parent=parent, kernel=kernel, quot=quot, proj=proj, reps=reps)


def quotient(group: FiniteGroup, kernel: NormalSubgroup, label: Optional[str] = None) -> QuotientData:
    """G/N with cosets ordered by their minimal element; that element is the coset representative."""
    if kernel.parent is not group:
        NormalSubgroup.build(group, kernel.members)
    idx = kernel.index_array
    proj = np.full(group.order, -1, dtype=np.int64)
    reps: List[int] = []
    for g in range(group.order):
        if proj[g] >= 0:
            continue
        coset = group.mul[g, idx]
        proj[coset] = len(reps)
        reps.append(g)
    reps_arr = np.asarray(reps, dtype=np.int64)
    table = proj[group.mul[np.ix_(reps_arr, reps_arr)]]
    names = [f"{group.name(int(r))}N" for r in reps_arr] if group.names else []
    quot = FiniteGroup(order=len(reps), mul=table, inv=np.argmin(table != 0, axis=1).astype(np.int64),
                       label=label or f"{group.label}/N", names=tuple(names))
    logger.debug(f"quotient {group.label} of order {group.order} by a subgroup of order {kernel.order} has order {quot.order}")
    return QuotientData(parent=group, kernel=kernel, quot=quot, proj=proj, reps=reps_arr)


@dataclass(frozen=True, eq=False)
class CrossSection:
    quotient: QuotientData
    sect: np.ndarray

    @classmethod
    def build(cls, quotient: QuotientData, sect: Sequence[int]) -> "CrossSection":
        sect = np.asarray(sect, dtype=np.int64)
        if sect.shape != (quotient.quot.order,):
            raise InvalidSection(f"section needs {quotient.quot.order} entries, got {sect.shape[0] if sect.ndim else 0}")
        if sect.min() < 0 or sect.max() >= quotient.parent.order:
            raise InvalidSection("section entry out of range")
        if sect[0] != 0:
            raise InvalidSection("section is not normalized: s(1) must be 1", witness={"s(1)": int(sect[0])})
        wrong = np.flatnonzero(quotient.proj[sect] != np.arange(quotient.quot.order))
        if len(wrong):
            raise InvalidSection("section does not split the projection", witness={"p": int(wrong[0])})
        return cls(quotient=quotient, sect=sect)

    @classmethod
    def minimal(cls, quotient: QuotientData) -> "CrossSection":
        return cls(quotient=quotient, sect=quotient.reps.copy())


@dataclass(frozen=True, eq=False)
class SectionCocycle:
    section: CrossSection
    table: np.ndarray


def section_cocycle(section: CrossSection) -> SectionCocycle:
    """table(p, q) = s(p) s(q) s(pq)^-1, checked against the nonabelian cocycle identity."""
    qd = section.quotient
    G, Q, s = qd.parent, qd.quot, section.sect
    pq = Q.mul
    table = G.mul[G.mul[s[:, None], s[None, :]], G.inv[s[pq]]]
    if not qd.kernel.positions[table].min() >= 0:
        raise VerificationFailed("section cocycle leaves the kernel")
    # s(p) n(q,r) s(p)^-1 n(p,qr) = n(p,q) n(pq,r)
    conj = G.conjugation_table()
    idx = np.arange(Q.order)
    lhs = G.mul[conj[s[:, None, None], table[None, :, :]], table[idx[:, None, None], pq[None, :, :]]]
    rhs = G.mul[table[:, :, None], table[pq[:, :, None], idx[None, None, :]]]
    if not (lhs == rhs).all():
        p, q, r = np.argwhere(lhs != rhs)[0]
        raise VerificationFailed("section cocycle identity fails", witness={"triple": [int(p), int(q), int(r)]})
    return SectionCocycle(section=section, table=table)


def decompose(g: int, section: CrossSection) -> Tuple[int, int]:
    """g = m s(p) with m in the kernel and p = proj(g)."""
    qd = section.quotient
    p = int(qd.proj[g])
    m = int(qd.parent.mul[g, qd.parent.inv[section.sect[p]]])
    return m, p


def enumerate_sections(quotient_data: QuotientData, budget: int) -> Iterator[CrossSection]:
    """All normalized sections, lexicographic in the chosen representatives."""
    cosets = [np.flatnonzero(quotient_data.proj == p).tolist() for p in range(1, quotient_data.quot.order)]
    count = 1
    for c in cosets:
        count *= len(c)
    ensure_budget(count, budget, "section enumeration")
    for choice in product(*cosets):
        yield CrossSection(quotient=quotient_data, sect=np.asarray((0,) + choice, dtype=np.int64))


def find_isomorphism(first: FiniteGroup, second: FiniteGroup, budget: int = 10_000_000) -> Optional[np.ndarray]:
    """Exhaustive search for an isomorphism first -> second, returned as an image array."""
    if first.order != second.order:
        return None
    n = first.order
    orders_first = np.array([first.element_order(g) for g in range(n)])
    orders_second = np.array([second.element_order(g) for g in range(n)])
    if sorted(orders_first.tolist()) != sorted(orders_second.tolist()):
        return None
    gens = first.generators()
    candidates = [np.flatnonzero(orders_second == orders_first[g]).tolist() for g in gens]
    count = 1
    for c in candidates:
        count *= len(c)
    ensure_budget(count * n, budget, "isomorphism search")

    for images in product(*candidates):
        image = _extend_homomorphism(first, second, gens, images)
        if image is not None and len(set(image.tolist())) == n:
            return image
    return None


def _extend_homomorphism(first: FiniteGroup, second: FiniteGroup, gens: Sequence[int], images: Sequence[int]) -> Optional[np.ndarray]:
    image = np.full(first.order, -1, dtype=np.int64)
    image[0] = 0
    frontier = [0]
    while frontier:
        nxt = []
        for x in frontier:
            for g, h in zip(gens, images):
                y = int(first.mul[x, g])
                value = int(second.mul[image[x], h])
                if image[y] < 0:
                    image[y] = value
                    nxt.append(y)
                elif image[y] != value:
                    return None
        frontier = nxt
    if not (image[first.mul] == second.mul[image[:, None], image[None, :]]).all():
        return None
    return image


def is_isomorphic(first: FiniteGroup, second: FiniteGroup, budget: int = 10_000_000) -> bool:
    return find_isomorphism(first, second, budget) is not None


# ------------------------------------------------------------------ families

def cyclic(n: int) -> FiniteGroup:
    if n <= 0:
        raise InvalidTable(f"cyclic group order must be positive, got {n}")
    idx = np.arange(n)
    return FiniteGroup.from_table((idx[:, None] + idx[None, :]) % n, label=f"Z/{n}", check_associativity=False)


def direct_product(factors: Sequence[FiniteGroup]) -> FiniteGroup:
    """Elements indexed in mixed radix, first factor most significant."""
    if not factors:
        return cyclic(1)
    result = factors[0]
    for nxt in factors[1:]:
        a, b = result.order, nxt.order
        table = (result.mul[:, None, :, None] * b + nxt.mul[None, :, None, :]).reshape(a * b, a * b)
        names = [f"({x},{y})" for x in (result.names or range(a)) for y in (nxt.names or range(b))]
        result = FiniteGroup.from_table(table, label=f"{result.label}x{nxt.label}", names=names, check_associativity=False)
    return result


def heisenberg_mod(k: int) -> FiniteGroup:
    """(a,b,c)(a',b',c') = (a+a', b+b', c+c'+ab') mod k, element (a,b,c) at index a k^2 + b k + c."""
    if k <= 0:
        raise InvalidTable(f"heisenberg modulus must be positive, got {k}")
    a, b, c = np.meshgrid(np.arange(k), np.arange(k), np.arange(k), indexing="ij")
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    na = (a[:, None] + a[None, :]) % k
    nb = (b[:, None] + b[None, :]) % k
    nc = (c[:, None] + c[None, :] + a[:, None] * b[None, :]) % k
    table = na * k * k + nb * k + nc
    names = [f"({x},{y},{z})" for x, y, z in zip(a, b, c)]
    return FiniteGroup.from_table(table, label=f"Heis({k})", names=names, check_associativity=False)
