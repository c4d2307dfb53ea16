"""Exact linear algebra over finite abelian groups.

A linear map between groups of the form Z/c_1 + ... + Z/c_n and Z/r_1 + ... + Z/r_m
is given by an integer matrix. Every row is scaled into Z/N with N the lcm of all
moduli, N is split into prime powers, and each prime power is eliminated with
full pivoting on p-adic valuation. Elimination steps are stored so that many
right-hand sides can be replayed in one batch.
"""

from math import lcm
from typing import List, Optional, Tuple

import numpy as np
from sympy import factorint


def valuation(values: np.ndarray, p: int, e: int) -> np.ndarray:
    """p-adic valuation of residues mod p**e, capped at e (zero has valuation e)."""
    out = np.zeros(values.shape, dtype=np.int64)
    power = 1
    for _ in range(e):
        power *= p
        out += (values % power == 0)
    return out


class PrimePowerElimination:
    """Row echelon form of an integer matrix over Z/p**e.

    Pivots are chosen with minimal valuation over the remaining block, so every
    entry to the right of a pivot is divisible by the pivot's p-power.
    """

    def __init__(self, matrix: np.ndarray, p: int, e: int):
        self.p = p
        self.e = e
        self.q = p ** e
        q = self.q

        work = np.array(matrix, dtype=np.int64) % q
        n_rows, n_cols = work.shape
        self.n_rows = n_rows
        self.n_cols = n_cols
        self.col_order = np.arange(n_cols)
        self.steps: List[Tuple[int, np.ndarray]] = []
        self.valuations: List[int] = []
        self.unit_inverses: List[int] = []

        k = 0
        while k < min(n_rows, n_cols):
            block = work[k:, k:]
            if not block.any():
                break
            vals = valuation(block, p, e)
            i, j = divmod(int(np.argmin(vals)), block.shape[1])
            v = int(vals[i, j])
            i += k
            j += k
            if i != k:
                work[[k, i]] = work[[i, k]]
            if j != k:
                work[:, [k, j]] = work[:, [j, k]]
                self.col_order[[k, j]] = self.col_order[[j, k]]
            pv = p ** v
            unit_inverse = pow(int(work[k, k]) // pv, -1, q)
            factors = ((work[k + 1:, k] // pv) * unit_inverse) % q
            work[k + 1:] = (work[k + 1:] - factors[:, None] * work[k]) % q
            self.steps.append((i, factors))
            self.valuations.append(v)
            self.unit_inverses.append(unit_inverse)
            k += 1

        self.rank = k
        self.echelon = work

    def reduce_rhs(self, rhs: np.ndarray) -> np.ndarray:
        b = np.array(rhs, dtype=np.int64) % self.q
        for k, (i, factors) in enumerate(self.steps):
            if i != k:
                b[[k, i]] = b[[i, k]]
            b[k + 1:] = (b[k + 1:] - factors[:, None] * b[k]) % self.q
        return b

    def back_substitute(self, b: np.ndarray, x: np.ndarray, offsets: Optional[np.ndarray] = None) -> np.ndarray:
        """Fill pivot coordinates of `x` (permuted order) from reduced right-hand sides `b`.

        Returns a mask of the columns of `b` for which every pivot row is solvable.
        """
        q = self.q
        ok = np.ones(x.shape[1], dtype=bool)
        for k in reversed(range(self.rank)):
            residual = (b[k] - self.echelon[k, k + 1:] @ x[k + 1:]) % q
            pv = self.p ** self.valuations[k]
            ok &= (residual % pv == 0)
            x[k] = ((residual // pv) * self.unit_inverses[k]) % (q // pv)
            if offsets is not None:
                x[k] = (x[k] + offsets[k]) % q
        return ok

    def solve(self, rhs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Solve for every column of `rhs` (rows x K). Free variables are set to zero."""
        b = self.reduce_rhs(rhs)
        ok = ~(b[self.rank:] % self.q).any(axis=0)
        x = np.zeros((self.n_cols, b.shape[1]), dtype=np.int64)
        ok &= self.back_substitute(b, x)
        out = np.zeros_like(x)
        out[self.col_order] = x
        return ok, out

    def kernel(self) -> np.ndarray:
        """Generators of the kernel over Z/p**e, one per row, original column order."""
        free = list(range(self.rank, self.n_cols))
        torsion = [k for k in range(self.rank) if self.valuations[k] > 0]
        count = len(free) + len(torsion)
        x = np.zeros((self.n_cols, count), dtype=np.int64)
        offsets = np.zeros((self.n_cols, count), dtype=np.int64)
        for idx, j in enumerate(free):
            x[j, idx] = 1
        for idx, k in enumerate(torsion, start=len(free)):
            offsets[k, idx] = self.q // self.p ** self.valuations[k]
        b = np.zeros((self.n_rows, count), dtype=np.int64)
        self.back_substitute(b, x, offsets)
        out = np.zeros_like(x)
        out[self.col_order] = x
        return out.T


class CongruenceSystem:
    """The map x -> matrix @ x from (+) Z/col_moduli to (+) Z/row_moduli.

    The matrix must describe a well-defined homomorphism; every caller builds it
    from module endomorphisms, so this is not re-checked here.
    """

    def __init__(self, matrix: np.ndarray, row_moduli: np.ndarray, col_moduli: np.ndarray):
        self.matrix = np.asarray(matrix, dtype=np.int64).reshape(len(row_moduli), len(col_moduli))
        self.row_moduli = np.asarray(row_moduli, dtype=np.int64)
        self.col_moduli = np.asarray(col_moduli, dtype=np.int64)
        self.modulus = lcm(1, *[int(m) for m in self.row_moduli], *[int(m) for m in self.col_moduli])
        self._scale = self.modulus // self.row_moduli if len(self.row_moduli) else self.row_moduli
        lifted = (self.matrix * self._scale[:, None]) % self.modulus

        self._locals: List[Tuple[int, PrimePowerElimination]] = []
        self._idempotents: List[int] = []
        for p, e in sorted(factorint(self.modulus).items()):
            q = int(p) ** int(e)
            self._locals.append((q, PrimePowerElimination(lifted % q, int(p), int(e))))
            cofactor = self.modulus // q
            self._idempotents.append((cofactor * pow(cofactor, -1, q)) % self.modulus)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.matrix.shape

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.int64)
        if x.ndim == 1:
            return (self.matrix @ x) % self.row_moduli
        return (self.matrix @ x) % self.row_moduli[:, None]

    def _combine(self, parts: List[np.ndarray]) -> np.ndarray:
        total = np.zeros_like(parts[0]) if parts else None
        for idem, part in zip(self._idempotents, parts):
            total = (total + idem * part) % self.modulus
        return total

    def solve_batch(self, rhs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Solve matrix @ x = rhs[:, j] for every column j.

        Returns (solvable mask of length K, solutions of shape cols x K reduced by column moduli).
        Unsolvable columns carry meaningless values.
        """
        rhs = np.asarray(rhs, dtype=np.int64).reshape(len(self.row_moduli), -1)
        n_rhs = rhs.shape[1]
        n_cols = len(self.col_moduli)
        if not self._locals:
            return np.ones(n_rhs, dtype=bool), np.zeros((n_cols, n_rhs), dtype=np.int64)
        scaled = (rhs * self._scale[:, None]) % self.modulus
        ok = np.ones(n_rhs, dtype=bool)
        parts = []
        for q, local in self._locals:
            local_ok, local_x = local.solve(scaled % q)
            ok &= local_ok
            parts.append(local_x)
        x = self._combine(parts) % self.col_moduli[:, None]
        return ok, x

    def solve(self, rhs: np.ndarray) -> Optional[np.ndarray]:
        ok, x = self.solve_batch(np.asarray(rhs, dtype=np.int64).reshape(-1, 1))
        if not ok[0]:
            return None
        return x[:, 0]

    def kernel_generators(self) -> np.ndarray:
        """Generators of the kernel, one per row, reduced by column moduli (zero rows dropped)."""
        n_cols = len(self.col_moduli)
        if not self._locals:
            return np.zeros((0, n_cols), dtype=np.int64)
        gens = []
        for (q, local), idem in zip(self._locals, self._idempotents):
            local_gens = local.kernel()
            if len(local_gens):
                gens.append((idem * local_gens) % self.modulus)
        if not gens:
            return np.zeros((0, n_cols), dtype=np.int64)
        stacked = np.vstack(gens) % self.col_moduli[None, :]
        return stacked[stacked.any(axis=1)]


def _local_smith(relations: np.ndarray, p: int, f: int) -> List[Tuple[int, np.ndarray]]:
    """p-primary cyclic factors of Z^k / rowspace(relations) as (order, coefficient row)."""
    q = p ** f
    work = np.array(relations, dtype=np.int64) % q
    n_rows, k = work.shape
    basis = np.eye(k, dtype=np.int64)
    factors: List[Tuple[int, np.ndarray]] = []

    t = 0
    while t < min(n_rows, k):
        block = work[t:, t:]
        if not block.any():
            break
        vals = valuation(block, p, f)
        i, j = divmod(int(np.argmin(vals)), block.shape[1])
        v = int(vals[i, j])
        i += t
        j += t
        if i != t:
            work[[t, i]] = work[[i, t]]
        if j != t:
            work[:, [t, j]] = work[:, [j, t]]
            basis[[t, j]] = basis[[j, t]]
        pv = p ** v
        unit_inverse = pow(int(work[t, t]) // pv, -1, q)
        below = ((work[t + 1:, t] // pv) * unit_inverse) % q
        work[t + 1:] = (work[t + 1:] - below[:, None] * work[t]) % q
        right = ((work[t, t + 1:] // pv) * unit_inverse) % q
        work[:, t + 1:] = (work[:, t + 1:] - work[:, t:t + 1] * right[None, :]) % q
        basis[t] = (basis[t] + right @ basis[t + 1:]) % q
        if v > 0:
            factors.append((pv, basis[t].copy()))
        t += 1

    for idx in range(t, k):
        factors.append((q, basis[idx].copy()))
    return factors


def cokernel_structure(relations: np.ndarray, exponent: int) -> Tuple[List[int], List[np.ndarray]]:
    """Invariant factors (ascending, each dividing the next) of Z^k / rowspace(relations).

    `exponent * Z^k` must lie in the row space. Each invariant factor comes with a
    coefficient vector (mod exponent) of an element of exactly that order.
    """
    relations = np.asarray(relations, dtype=np.int64)
    k = relations.shape[1]
    per_prime: List[List[Tuple[int, np.ndarray]]] = []
    for p, f in sorted(factorint(exponent).items()):
        p, f = int(p), int(f)
        local = _local_smith(relations, p, f)
        cofactor = exponent // p ** f
        local = [(order, (cofactor * coeffs) % exponent) for order, coeffs in local]
        local.sort(key=lambda item: -item[0])
        per_prime.append(local)

    depth = max((len(local) for local in per_prime), default=0)
    orders: List[int] = []
    generators: List[np.ndarray] = []
    for idx in range(depth):
        order = 1
        coeffs = np.zeros(k, dtype=np.int64)
        for local in per_prime:
            if idx < len(local):
                order *= local[idx][0]
                coeffs = (coeffs + local[idx][1]) % exponent
        orders.append(order)
        generators.append(coeffs)
    orders.reverse()
    generators.reverse()
    return orders, generators


def matrix_of(linear_map, n_inputs: int, chunk: int = 256) -> np.ndarray:
    """Matrix of a batched linear map (K x n_inputs -> K x n_outputs) built column block by column block."""
    blocks = []
    for start in range(0, n_inputs, chunk):
        stop = min(start + chunk, n_inputs)
        basis = np.zeros((stop - start, n_inputs), dtype=np.int64)
        basis[np.arange(stop - start), np.arange(start, stop)] = 1
        blocks.append(np.asarray(linear_map(basis), dtype=np.int64))
    if not blocks:
        return np.zeros((int(np.asarray(linear_map(np.zeros((1, 0), dtype=np.int64))).shape[1]), 0), dtype=np.int64)
    return np.vstack(blocks).T
