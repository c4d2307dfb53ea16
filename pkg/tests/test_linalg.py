import numpy as np
from src.obslab.services.linalg import CongruenceSystem, cokernel_structure, matrix_of, valuation


class TestValuation:
    def test_capped_at_exponent(self):
        assert valuation(np.array([0, 1, 2, 4, 6]), 2, 3).tolist() == [3, 0, 1, 2, 1]


class TestCongruenceSystem:
    def test_solvable_with_torsion(self):
        system = CongruenceSystem(np.array([[2]]), [4], [4])
        x = system.solve(np.array([2]))
        assert x is not None
        assert system.apply(x).tolist() == [2]

    def test_unsolvable(self):
        system = CongruenceSystem(np.array([[2]]), [4], [4])
        assert system.solve(np.array([1])) is None

    def test_mixed_moduli_crt(self):
        # Z/6 -> Z/2 + Z/3, x -> (x mod 2, x mod 3)
        system = CongruenceSystem(np.array([[1], [1]]), [2, 3], [6])
        x = system.solve(np.array([1, 2]))
        assert x.tolist() == [5]
        assert len(system.kernel_generators()) == 0

    def test_kernel_generators(self):
        system = CongruenceSystem(np.array([[2]]), [4], [4])
        gens = system.kernel_generators()
        assert len(gens) >= 1
        assert all(system.apply(g).tolist() == [0] for g in gens)
        assert 2 in {int(g[0]) for g in gens}

    def test_solve_batch(self):
        system = CongruenceSystem(np.array([[1, 1], [0, 2]]), [4, 4], [4, 4])
        rhs = np.array([[1, 1], [2, 1]])           # columns (1, 2) and (1, 1)
        ok, x = system.solve_batch(rhs)
        assert ok.tolist() == [True, False]
        assert system.apply(x[:, 0]).tolist() == [1, 2]

    def test_modulus_is_lcm(self):
        system = CongruenceSystem(np.zeros((1, 2), dtype=np.int64), [4], [6, 10])
        assert system.modulus == 60


class TestCokernelStructure:
    def test_two_factors(self):
        orders, coeffs = cokernel_structure(np.array([[2, 0], [0, 4], [4, 0]]), 4)
        assert orders == [2, 4]
        assert len(coeffs) == 2

    def test_cyclic_across_primes(self):
        orders, _ = cokernel_structure(np.array([[6]]), 6)
        assert orders == [6]

    def test_trivial(self):
        orders, coeffs = cokernel_structure(np.array([[1, 0], [0, 1]]), 2)
        assert orders == []
        assert coeffs == []


class TestMatrixOf:
    def test_recovers_matrix(self):
        A = np.array([[1, 2], [3, 4], [5, 6]])
        assert matrix_of(lambda x: x @ A.T, 2).tolist() == A.tolist()

    def test_chunks(self):
        A = np.arange(12).reshape(2, 6)
        assert matrix_of(lambda x: x @ A.T, 6, chunk=4).tolist() == A.tolist()
