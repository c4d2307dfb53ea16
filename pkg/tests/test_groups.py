import numpy as np
import pytest
from src.obslab.errors import InvalidSection, InvalidTable, NotNormal, NotSubgroup
from src.obslab.services.groups import (
    CrossSection,
    FiniteGroup,
    NormalSubgroup,
    QuotientData,
    cyclic,
    decompose,
    direct_product,
    enumerate_sections,
    find_isomorphism,
    heisenberg_mod,
    is_isomorphic,
    quotient,
    section_cocycle,
)

# a loop of order 5: Latin square with identity, 1 * 1 = 0, so it cannot be a group
LOOP_5 = [
    [0, 1, 2, 3, 4],
    [1, 0, 3, 4, 2],
    [2, 4, 0, 1, 3],
    [3, 2, 4, 0, 1],
    [4, 3, 1, 2, 0],
]


class TestFiniteGroup:
    def test_cyclic(self):
        G = cyclic(4)
        assert G.order == 4
        assert G.inv.tolist() == [0, 3, 2, 1]
        assert G.element_order(1) == 4
        assert G.element_order(2) == 2
        assert G.is_abelian()
        assert G.generators() == [1]

    def test_non_associative_table(self):
        with pytest.raises(InvalidTable, match="not associative") as info:
            FiniteGroup.from_table(LOOP_5)
        a, b, c = info.value.witness["triple"]
        M = np.array(LOOP_5)
        assert M[M[a, b], c] != M[a, M[b, c]]

    def test_identity_required(self):
        with pytest.raises(InvalidTable, match="identity"):
            FiniteGroup.from_table([[1, 0], [0, 1]])

    def test_row_not_permutation(self):
        with pytest.raises(InvalidTable):
            FiniteGroup.from_table([[0, 1, 2], [1, 1, 0], [2, 0, 1]])

    def test_heisenberg(self):
        G = heisenberg_mod(2)
        assert G.order == 8
        assert not G.is_abelian()
        assert NormalSubgroup.center(G).members == (0, 1)

    def test_heisenberg_law(self):
        k = 3
        G = heisenberg_mod(k)

        def index(a, b, c):
            return a * k * k + b * k + c

        # (1,0,0)(0,1,0) = (1,1,1) and (0,1,0)(1,0,0) = (1,1,0)
        assert G.mul[index(1, 0, 0), index(0, 1, 0)] == index(1, 1, 1)
        assert G.mul[index(0, 1, 0), index(1, 0, 0)] == index(1, 1, 0)

    def test_conjugation_table(self):
        G = heisenberg_mod(2)
        conj = G.conjugation_table()
        assert conj[2, 4] == G.conj(2, 4)
        assert conj[0].tolist() == list(range(8))


class TestIsomorphism:
    def test_klein_is_not_cyclic(self):
        assert not is_isomorphic(direct_product([cyclic(2), cyclic(2)]), cyclic(4))

    def test_crt(self):
        first = direct_product([cyclic(2), cyclic(3)])
        image = find_isomorphism(first, cyclic(6))
        assert image is not None
        assert (image[first.mul] == cyclic(6).mul[image[:, None], image[None, :]]).all()


class TestNormalSubgroup:
    def test_build(self):
        N = NormalSubgroup.build(cyclic(4), [2, 0])
        assert N.members == (0, 2)
        assert N.positions.tolist() == [0, -1, 1, -1]
        assert N.contains(2) and not N.contains(1)

    def test_not_closed(self):
        with pytest.raises(NotSubgroup):
            NormalSubgroup.build(cyclic(4), [0, 1])

    def test_missing_identity(self):
        with pytest.raises(NotSubgroup):
            NormalSubgroup.build(cyclic(4), [2])

    def test_not_normal(self):
        # {(0,0,0), (1,0,0)} in Heis(2)
        with pytest.raises(NotNormal):
            NormalSubgroup.build(heisenberg_mod(2), [0, 4])

    def test_as_group(self):
        N = NormalSubgroup.build(cyclic(4), [0, 2])
        assert N.as_group.order == 2
        assert N.as_group.mul.tolist() == [[0, 1], [1, 0]]


class TestQuotient:
    def test_minimal_representatives(self):
        qd = quotient(cyclic(4), NormalSubgroup.build(cyclic(4), [0, 2]))
        assert qd.quot.order == 2
        assert qd.proj.tolist() == [0, 1, 0, 1]
        assert qd.reps.tolist() == [0, 1]

    def test_from_projection(self):
        G = cyclic(4)
        K = NormalSubgroup.build(G, [0, 2])
        qd = QuotientData.from_projection(G, K, cyclic(2), [0, 1, 0, 1])
        assert qd.reps.tolist() == [0, 1]

    def test_from_projection_not_homomorphism(self):
        G = cyclic(4)
        K = NormalSubgroup.build(G, [0, 2])
        with pytest.raises(InvalidTable):
            QuotientData.from_projection(G, K, cyclic(2), [0, 1, 0, 0])


class TestSections:
    @pytest.fixture
    def qd(self):
        G = cyclic(4)
        return quotient(G, NormalSubgroup.build(G, [0, 2]))

    def test_section_cocycle(self, qd):
        table = section_cocycle(CrossSection.minimal(qd)).table
        assert table.tolist() == [[0, 0], [0, 2]]

    def test_other_section(self, qd):
        table = section_cocycle(CrossSection.build(qd, [0, 3])).table
        # 3 + 3 = 6 = 2 mod 4
        assert table.tolist() == [[0, 0], [0, 2]]

    def test_unnormalized_section(self, qd):
        with pytest.raises(InvalidSection):
            CrossSection.build(qd, [2, 1])

    def test_section_must_split(self, qd):
        with pytest.raises(InvalidSection):
            CrossSection.build(qd, [0, 2])

    def test_enumerate_sections(self, qd):
        sections = [s.sect.tolist() for s in enumerate_sections(qd, budget=100)]
        assert sections == [[0, 1], [0, 3]]

    def test_decompose(self, qd):
        assert decompose(3, CrossSection.minimal(qd)) == (2, 1)
