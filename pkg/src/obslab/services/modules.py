"""Finite abelian coefficient modules with a group action and a flow automorphism.

A = Z/n_1 + ... + Z/n_r is written additively. Elements are integer vectors and,
where tables are needed, integer codes in mixed radix with the first component
most significant, so code order is lexicographic order on vectors.
"""

from dataclasses import dataclass, field
from functools import cached_property
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from sympy import Matrix
from sympy.matrices.normalforms import invariant_factors

from ..errors import (
    ActionNotDescending,
    InvalidAction,
    InvalidAutomorphism,
    InvalidFlow,
    ProblemFormatError,
    TorusCoercionFailed,
    ensure_budget,
)
from ..log import logger
from .groups import FiniteGroup, NormalSubgroup, QuotientData
from .linalg import CongruenceSystem


@dataclass(frozen=True, eq=False)
class AbelianModule:
    moduli: Tuple[int, ...]

    def __post_init__(self):
        if any(int(n) <= 0 for n in self.moduli):
            raise ProblemFormatError(f"moduli must be positive, got {list(self.moduli)}")

    @classmethod
    def cyclic(cls, n: int) -> "AbelianModule":
        return cls(moduli=(int(n),))

    @property
    def rank(self) -> int:
        return len(self.moduli)

    @cached_property
    def mod(self) -> np.ndarray:
        return np.asarray(self.moduli, dtype=np.int64)

    @cached_property
    def size(self) -> int:
        return int(np.prod(self.mod)) if self.rank else 1

    @cached_property
    def weights(self) -> np.ndarray:
        w = np.ones(self.rank, dtype=np.int64)
        for i in range(self.rank - 2, -1, -1):
            w[i] = w[i + 1] * self.moduli[i + 1]
        return w

    @cached_property
    def elements(self) -> np.ndarray:
        """All elements as vectors, row index = code."""
        if not self.rank:
            return np.zeros((1, 0), dtype=np.int64)
        grids = np.meshgrid(*[np.arange(n) for n in self.moduli], indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1).astype(np.int64)

    def reduce(self, vecs: np.ndarray) -> np.ndarray:
        return np.asarray(vecs, dtype=np.int64) % self.mod

    def encode(self, vecs: np.ndarray) -> np.ndarray:
        return (self.reduce(vecs) * self.weights).sum(axis=-1)

    def decode(self, codes: Union[int, np.ndarray]) -> np.ndarray:
        return self.elements[codes]

    def element_order(self, vec: Sequence[int]) -> int:
        v = self.reduce(vec)
        order = 1
        for x, n in zip(v.tolist(), self.moduli):
            order = np.lcm(order, n // np.gcd(x, n))
        return int(order)

    def zero(self) -> np.ndarray:
        return np.zeros(self.rank, dtype=np.int64)

    def describe(self) -> str:
        return " + ".join(f"Z/{n}" for n in self.moduli) if self.rank else "0"


@dataclass(frozen=True, eq=False)
class ModuleAut:
    module: AbelianModule
    matrix: np.ndarray

    @classmethod
    def build(cls, module: AbelianModule, matrix: Sequence[Sequence[int]], require_bijective: bool = True) -> "ModuleAut":
        r = module.rank
        mat = np.asarray(matrix, dtype=np.int64).reshape(r, r) if r else np.zeros((0, 0), dtype=np.int64)
        n = module.mod
        step = n[:, None] // np.gcd(n[:, None], n[None, :])
        bad = np.argwhere(mat % step != 0)
        if len(bad):
            i, j = (int(v) for v in bad[0])
            raise InvalidAutomorphism(
                f"entry ({i},{j}) must be a multiple of {int(step[i, j])} to define an endomorphism",
                witness={"entry": [i, j]},
            )
        mat = mat % n[:, None] if r else mat
        aut = cls(module=module, matrix=mat)
        if require_bijective and r:
            kernel = CongruenceSystem(mat, n, n).kernel_generators()
            if len(kernel):
                raise InvalidAutomorphism("matrix is not injective", witness={"kernel_element": kernel[0].tolist()})
        return aut

    @classmethod
    def identity(cls, module: AbelianModule) -> "ModuleAut":
        return cls(module=module, matrix=np.eye(module.rank, dtype=np.int64) % module.mod[:, None] if module.rank else np.zeros((0, 0), dtype=np.int64))

    def apply(self, vecs: np.ndarray) -> np.ndarray:
        return (np.asarray(vecs, dtype=np.int64) @ self.matrix.T) % self.module.mod

    def compose(self, other: "ModuleAut") -> "ModuleAut":
        """self after other"""
        return ModuleAut(module=self.module, matrix=(self.matrix @ other.matrix) % self.module.mod[:, None])

    def is_identity(self) -> bool:
        return bool((self.matrix == ModuleAut.identity(self.module).matrix).all())

    def equals(self, other: "ModuleAut") -> bool:
        return bool((self.matrix == other.matrix).all())

    @cached_property
    def order(self) -> int:
        k, power = 1, self
        while not power.is_identity():
            power = power.compose(self)
            k += 1
        return k

    def power(self, s: int) -> "ModuleAut":
        if s < 0:
            s = s % self.order
        result = ModuleAut.identity(self.module)
        for _ in range(s):
            result = result.compose(self)
        return result

    @cached_property
    def permutation(self) -> np.ndarray:
        """Action on element codes."""
        return self.module.encode(self.apply(self.module.elements))


@dataclass(frozen=True, eq=False)
class GroupAction:
    group: FiniteGroup
    module: AbelianModule
    auts: np.ndarray

    @classmethod
    def build(cls, group: FiniteGroup, module: AbelianModule, matrices: Sequence[Sequence[Sequence[int]]]) -> "GroupAction":
        """One matrix per group element. Checks each is an automorphism and that g -> matrix is a homomorphism."""
        mats = np.asarray(matrices, dtype=np.int64).reshape(group.order, module.rank, module.rank)
        checked = np.stack([ModuleAut.build(module, m).matrix for m in mats]) if module.rank else mats
        action = cls(group=group, module=module, auts=checked)
        action._check_homomorphism()
        return action

    @classmethod
    def from_generators(cls, group: FiniteGroup, module: AbelianModule, generator_matrices: Dict[int, Sequence[Sequence[int]]]) -> "GroupAction":
        """Close generator images under multiplication; inconsistent images raise InvalidAction."""
        r = module.rank
        auts: List[Optional[np.ndarray]] = [None] * group.order
        auts[0] = ModuleAut.identity(module).matrix
        gens = {int(g): ModuleAut.build(module, m).matrix for g, m in generator_matrices.items()}
        frontier = [0]
        while frontier:
            nxt = []
            for x in frontier:
                for g, mat in gens.items():
                    y = int(group.mul[x, g])
                    value = (auts[x] @ mat) % module.mod[:, None] if r else auts[x]
                    if auts[y] is None:
                        auts[y] = value
                        nxt.append(y)
                    elif not (auts[y] == value).all():
                        raise InvalidAction("generator images do not define an action", witness={"element": y})
            frontier = nxt
        if any(a is None for a in auts):
            raise InvalidAction("generators do not generate the group")
        action = cls(group=group, module=module, auts=np.stack(auts))
        action._check_homomorphism()
        return action

    @classmethod
    def trivial(cls, group: FiniteGroup, module: AbelianModule) -> "GroupAction":
        eye = ModuleAut.identity(module).matrix
        return cls(group=group, module=module, auts=np.repeat(eye[None], group.order, axis=0))

    def _check_homomorphism(self) -> None:
        mod = self.module.mod[None, None, :, None]
        if self.module.rank == 0:
            return
        if not (self.auts[0] == ModuleAut.identity(self.module).matrix).all():
            raise InvalidAction("identity element must act trivially")
        composed = np.einsum("gij,hjk->ghik", self.auts, self.auts) % mod
        expected = self.auts[self.group.mul]
        bad = np.argwhere((composed != expected).any(axis=(2, 3)))
        if len(bad):
            g, h = (int(v) for v in bad[0])
            raise InvalidAction("action is not a homomorphism", witness={"pair": [g, h]})

    def aut(self, g: int) -> ModuleAut:
        return ModuleAut(module=self.module, matrix=self.auts[g])

    def act(self, g: Union[int, np.ndarray], vecs: np.ndarray) -> np.ndarray:
        """alpha_g applied to vectors; g may be an index array broadcast against the leading axes of vecs."""
        mats = self.auts[g]
        return np.einsum("...ij,...j->...i", mats, np.asarray(vecs, dtype=np.int64)) % self.module.mod

    def is_trivial(self) -> bool:
        eye = ModuleAut.identity(self.module).matrix
        return bool((self.auts == eye[None]).all())

    def trivial_on(self, members: Sequence[int]) -> bool:
        eye = ModuleAut.identity(self.module).matrix
        return bool((self.auts[list(members)] == eye[None]).all())

    def descend(self, quotient_data: QuotientData) -> "GroupAction":
        if not self.trivial_on(quotient_data.kernel.members):
            raise InvalidAction("kernel acts nontrivially, the action does not descend")
        return GroupAction(group=quotient_data.quot, module=self.module, auts=self.auts[quotient_data.reps])

    def pullback(self, parent: FiniteGroup, proj: np.ndarray) -> "GroupAction":
        return GroupAction(group=parent, module=self.module, auts=self.auts[np.asarray(proj)])


@dataclass(frozen=True, eq=False)
class FlowModule:
    """Coefficients A with the action alpha of a group and a commuting flow automorphism theta.

    `torus` is a cyclic subgroup of elements fixed by theta and every alpha_g,
    stored by its generator.
    """

    module: AbelianModule
    theta: ModuleAut
    action: GroupAction
    torus_generator: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, module: AbelianModule, action: GroupAction, theta: Optional[ModuleAut] = None, torus: Union[str, Sequence[int]] = "auto") -> "FlowModule":
        theta = theta if theta is not None else ModuleAut.identity(module)
        if theta.module.moduli != module.moduli or action.module.moduli != module.moduli:
            raise InvalidFlow("theta, action and module disagree on the moduli")
        mod = module.mod[None, :, None]
        left = np.einsum("ij,gjk->gik", theta.matrix, action.auts) % mod
        right = np.einsum("gij,jk->gik", action.auts, theta.matrix) % mod
        bad = np.flatnonzero((left != right).any(axis=(1, 2)))
        if len(bad):
            raise InvalidFlow("theta does not commute with the action", witness={"g": int(bad[0])})

        fixed = cls._fixed_codes(module, theta, action)
        if isinstance(torus, str):
            if torus != "auto":
                raise InvalidFlow(f"unknown torus choice '{torus}'")
            orders = [module.element_order(module.decode(c)) for c in fixed]
            best = max(orders)
            generator = module.decode(fixed[orders.index(best)])
        else:
            generator = module.reduce(torus)
            if module.encode(generator) not in set(fixed.tolist()):
                raise InvalidFlow("torus generator is not fixed by theta and the action", witness={"generator": generator.tolist()})
        return cls(module=module, theta=theta, action=action, torus_generator=np.asarray(generator, dtype=np.int64))

    @classmethod
    def trivial(cls, group: FiniteGroup, module: AbelianModule) -> "FlowModule":
        return cls.build(module, GroupAction.trivial(group, module))

    @staticmethod
    def _fixed_codes(module: AbelianModule, theta: ModuleAut, action: GroupAction) -> np.ndarray:
        elems = module.elements
        mask = module.encode(theta.apply(elems)) == np.arange(module.size)
        for g in range(action.group.order):
            mask &= module.encode(action.act(g, elems)) == np.arange(module.size)
        return np.flatnonzero(mask)

    @property
    def group(self) -> FiniteGroup:
        return self.action.group

    @property
    def rank(self) -> int:
        return self.module.rank

    # ------------------------------------------------------------- torus

    @cached_property
    def torus_order(self) -> int:
        return self.module.element_order(self.torus_generator)

    @cached_property
    def torus_codes(self) -> np.ndarray:
        k = np.arange(self.torus_order)
        return self.module.encode(k[:, None] * self.torus_generator[None, :])

    @cached_property
    def _torus_index(self) -> np.ndarray:
        index = np.full(self.module.size, -1, dtype=np.int64)
        index[self.torus_codes] = np.arange(self.torus_order)
        return index

    def in_torus(self, vecs: np.ndarray) -> np.ndarray:
        return self._torus_index[self.module.encode(vecs)] >= 0

    def to_torus(self, vecs: np.ndarray) -> np.ndarray:
        """Torus elements as integers k mod T with value k * generator."""
        index = self._torus_index[self.module.encode(vecs)]
        if (index < 0).any():
            where = np.argwhere(np.atleast_1d(index) < 0)[0].tolist()
            raise TorusCoercionFailed("value outside the torus", witness={"position": where})
        return index

    def from_torus(self, ks: np.ndarray) -> np.ndarray:
        ks = np.asarray(ks, dtype=np.int64)
        return self.module.reduce(ks[..., None] * self.torus_generator)

    def torus_module(self, group: Optional[FiniteGroup] = None) -> "FlowModule":
        """Z/T with trivial action and flow; the whole module is the torus. Cached for the own group."""
        if group is None or group is self.group:
            return self._own_torus
        return self._make_torus(group)

    @cached_property
    def _own_torus(self) -> "FlowModule":
        return self._make_torus(self.group)

    def _make_torus(self, group: FiniteGroup) -> "FlowModule":
        cyc = AbelianModule.cyclic(self.torus_order)
        return FlowModule(module=cyc, theta=ModuleAut.identity(cyc), action=GroupAction.trivial(group, cyc),
                          torus_generator=np.ones(1, dtype=np.int64))

    @cached_property
    def fixed_codes(self) -> np.ndarray:
        return self._fixed_codes(self.module, self.theta, self.action)

    def is_ergodic(self) -> bool:
        return len(self.fixed_codes) == self.torus_order

    # ------------------------------------------------------------- flow

    @cached_property
    def theta_minus_one(self) -> np.ndarray:
        return (self.theta.matrix - np.eye(self.rank, dtype=np.int64)) % self.module.mod[:, None]

    def coboundary(self, vecs: np.ndarray) -> np.ndarray:
        """theta(v) - v"""
        return (np.asarray(vecs, dtype=np.int64) @ self.theta_minus_one.T) % self.module.mod

    @cached_property
    def _boundary_codes(self) -> np.ndarray:
        return self.module.encode(self.coboundary(self.module.elements))

    @cached_property
    def image_codes(self) -> np.ndarray:
        """Im(theta - 1), sorted."""
        return np.unique(self._boundary_codes)

    @cached_property
    def _min_preimage(self) -> np.ndarray:
        table = np.full(self.module.size, -1, dtype=np.int64)
        codes, first = np.unique(self._boundary_codes, return_index=True)
        table[codes] = first
        return table

    def preimage(self, vecs: np.ndarray) -> np.ndarray:
        """Smallest v with theta(v) - v = a, for every a (all must lie in Im(theta - 1))."""
        pre = self._min_preimage[self.module.encode(vecs)]
        if (pre < 0).any():
            raise InvalidFlow("value is not a flow coboundary", witness={"position": np.argwhere(np.atleast_1d(pre) < 0)[0].tolist()})
        return self.module.decode(pre)

    def is_flow_coboundary(self, vecs: np.ndarray) -> np.ndarray:
        return self._min_preimage[self.module.encode(vecs)] >= 0

    @cached_property
    def canonical_codes(self) -> np.ndarray:
        """canonical_codes[code] = smallest code in code + Im(theta - 1)."""
        elems = self.module.elements
        shifted = self.module.encode(elems[:, None, :] + self.module.decode(self.image_codes)[None, :, :])
        return shifted.min(axis=1)

    def canonical(self, vecs: np.ndarray) -> np.ndarray:
        return self.module.decode(self.canonical_codes[self.module.encode(vecs)])

    def class_codes(self, vecs: np.ndarray) -> np.ndarray:
        return self.canonical_codes[self.module.encode(vecs)]

    @cached_property
    def class_representatives(self) -> np.ndarray:
        return self.module.decode(np.unique(self.canonical_codes))

    @cached_property
    def _bracket_cache(self) -> Dict[int, np.ndarray]:
        return {}

    def bracket_matrix(self, s: int) -> np.ndarray:
        """Matrix of [s]_theta: sum_{0<=j<s} theta^j for s >= 0, -sum_{1<=j<=-s} theta^-j for s < 0."""
        cache = self._bracket_cache
        if s not in cache:
            mod = self.module.mod[:, None]
            total = np.zeros((self.rank, self.rank), dtype=np.int64)
            if s >= 0:
                power = np.eye(self.rank, dtype=np.int64)
                for _ in range(s):
                    total = (total + power) % mod
                    power = (self.theta.matrix @ power) % mod
            else:
                inverse = self.theta.power(-1).matrix
                power = inverse.copy()
                for _ in range(-s):
                    total = (total - power) % mod
                    power = (inverse @ power) % mod
            cache[s] = total
        return cache[s]

    def bracket(self, s: int, vecs: np.ndarray) -> np.ndarray:
        return (np.asarray(vecs, dtype=np.int64) @ self.bracket_matrix(s).T) % self.module.mod

    def theta_power(self, s: int, vecs: np.ndarray) -> np.ndarray:
        return (np.asarray(vecs, dtype=np.int64) @ self.theta.power(s).matrix.T) % self.module.mod

    # ------------------------------------------------------------- derived modules

    def descend(self, quotient_data: QuotientData) -> "FlowModule":
        return FlowModule(module=self.module, theta=self.theta, action=self.action.descend(quotient_data), torus_generator=self.torus_generator)

    def pullback(self, parent: FiniteGroup, proj: np.ndarray) -> "FlowModule":
        return FlowModule(module=self.module, theta=self.theta, action=self.action.pullback(parent, proj), torus_generator=self.torus_generator)

    def with_trivial_flow(self) -> "FlowModule":
        return FlowModule(module=self.module, theta=ModuleAut.identity(self.module), action=self.action, torus_generator=self.torus_generator)

    def describe(self) -> Dict:
        return {
            "moduli": list(self.module.moduli),
            "theta": self.theta.matrix.tolist(),
            "action": self.action.auts.tolist(),
            "torus_generator": self.torus_generator.tolist(),
        }


@dataclass(frozen=True, eq=False)
class FlowCocycleClass:
    """Class of the Z-flow 1-cocycle with value `representative` at 1, in A / Im(theta - 1)."""

    flow: FlowModule
    representative: Tuple[int, ...]
    witness: Optional[Tuple[int, ...]] = None

    @property
    def is_coboundary(self) -> bool:
        return not any(self.representative)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FlowCocycleClass):
            return NotImplemented
        return self.flow is other.flow and self.representative == other.representative

    def __hash__(self) -> int:
        return hash((id(self.flow), self.representative))


@dataclass(frozen=True)
class H1Structure:
    invariant_factors: Tuple[int, ...]
    representatives: np.ndarray
    image_size: int

    @property
    def order(self) -> int:
        return int(np.prod(self.invariant_factors)) if self.invariant_factors else 1


def flow_h1(flow: FlowModule) -> H1Structure:
    """A / Im(theta - 1) from the presentation with relations theta - 1 and the moduli."""
    r = flow.rank
    if r == 0:
        return H1Structure(invariant_factors=(), representatives=np.zeros((1, 0), dtype=np.int64), image_size=1)
    relations = np.vstack([flow.theta_minus_one.T, np.diag(flow.module.mod)])
    factors = [int(f) for f in invariant_factors(Matrix(relations.tolist()))]
    factors = tuple(sorted(abs(f) for f in factors if abs(f) > 1))
    reps = flow.class_representatives
    logger.debug(f"H1 of the flow on {flow.module.describe()}: factors {list(factors)}, {len(reps)} classes")
    return H1Structure(invariant_factors=factors, representatives=reps, image_size=len(flow.image_codes))


def h1_class(vec: Sequence[int], flow: FlowModule) -> FlowCocycleClass:
    a = flow.module.reduce(vec)
    rep = tuple(int(x) for x in flow.canonical(a))
    witness = None
    if flow.is_flow_coboundary(a):
        witness = tuple(int(x) for x in flow.preimage(a))
    return FlowCocycleClass(flow=flow, representative=rep, witness=witness)


def canonical_rep(cls: FlowCocycleClass) -> np.ndarray:
    return np.asarray(cls.representative, dtype=np.int64)


@dataclass(frozen=True, eq=False)
class EquivariantHom:
    """A G-equivariant homomorphism N -> H^1_theta stored by canonical representatives (|N| x r)."""

    subgroup: NormalSubgroup
    flow: FlowModule
    values: np.ndarray

    def __call__(self, n: Union[int, np.ndarray]) -> np.ndarray:
        return self.values[self.subgroup.positions[n]]

    def is_zero(self) -> bool:
        return not self.values.any()

    def equals(self, other: "EquivariantHom") -> bool:
        return bool((self.values == other.values).all())


def _check_descends_to_h1(flow: FlowModule) -> None:
    image = set(flow.image_codes.tolist())
    elems = flow.module.decode(flow.image_codes)
    for g in range(flow.group.order):
        moved = flow.module.encode(flow.action.act(g, elems))
        if not set(moved.tolist()) <= image:
            raise ActionNotDescending("alpha_g does not preserve Im(theta - 1)", witness={"g": g})


def check_equivariant_hom(subgroup: NormalSubgroup, flow: FlowModule, values: np.ndarray) -> Optional[Dict]:
    """First failure of additivity or equivariance as a witness dict, None when values define an element of Hom_G(N, H^1)."""
    G = subgroup.parent
    idx = subgroup.index_array
    pos = subgroup.positions
    codes = flow.class_codes(values)
    if (codes != flow.module.encode(values)).any():
        return {"axiom": "canonical", "n": int(idx[np.argmax(codes != flow.module.encode(values))])}
    sums = flow.class_codes(values[:, None, :] + values[None, :, :])
    prods = codes[pos[G.mul[np.ix_(idx, idx)]]]
    bad = np.argwhere(sums != prods)
    if len(bad):
        return {"axiom": "additive", "pair": [int(idx[bad[0][0]]), int(idx[bad[0][1]])]}
    conj = G.conjugation_table()[:, idx]
    moved = flow.class_codes(flow.action.act(np.arange(G.order)[:, None], np.broadcast_to(values, (G.order,) + values.shape)))
    bad = np.argwhere(codes[pos[conj]] != moved)
    if len(bad):
        return {"axiom": "equivariant", "g": int(bad[0][0]), "n": int(idx[bad[0][1]])}
    return None


def enumerate_equivariant_homs(subgroup: NormalSubgroup, flow: FlowModule, budget: int = 5_000_000) -> List[EquivariantHom]:
    """All of Hom_G(N, H^1_theta), ordered lexicographically by the images of the generators of N."""
    _check_descends_to_h1(flow)
    G = subgroup.parent
    gens = G.generators(subgroup.members)
    classes = np.unique(flow.canonical_codes)
    ensure_budget(len(classes) ** len(gens) * max(subgroup.order, 1), budget, "equivariant homomorphism enumeration")

    found: List[EquivariantHom] = []
    for images in product(classes.tolist(), repeat=len(gens)):
        values = _extend_to_subgroup(subgroup, flow, gens, images)
        if values is None:
            continue
        if check_equivariant_hom(subgroup, flow, values) is None:
            found.append(EquivariantHom(subgroup=subgroup, flow=flow, values=values))
    logger.debug(f"{len(found)} equivariant homomorphisms from a subgroup of order {subgroup.order}")
    return found


def _extend_to_subgroup(subgroup: NormalSubgroup, flow: FlowModule, gens: Sequence[int], images: Sequence[int]) -> Optional[np.ndarray]:
    G = subgroup.parent
    pos = subgroup.positions
    values = np.zeros((subgroup.order, flow.rank), dtype=np.int64)
    seen = np.zeros(subgroup.order, dtype=bool)
    seen[0] = True
    frontier = [0]
    image_vecs = [flow.module.decode(c) for c in images]
    while frontier:
        nxt = []
        for x in frontier:
            for g, v in zip(gens, image_vecs):
                y = int(G.mul[x, g])
                value = flow.canonical(values[pos[x]] + v)
                if not seen[pos[y]]:
                    seen[pos[y]] = True
                    values[pos[y]] = value
                    nxt.append(y)
                elif (values[pos[y]] != value).any():
                    return None
        frontier = nxt
    return values
