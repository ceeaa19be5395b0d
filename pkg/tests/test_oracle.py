from fractions import Fraction

import numpy as np
import pytest

from qtopo.model import as_bits, assemble, bitstring, make_structure
from qtopo.oracle import (
    CapExceeded, b_ainv_b, b_vector, brute_force, exact_psi, lowest_argmin, solve_temperature,
)

# U_target for every tri3 structure, from exact rational 2x2 solves
TRI3_U_TARGET = {
    "000": Fraction(10, 3), "001": Fraction(10, 21), "010": Fraction(100, 21), "011": Fraction(5, 6),
    "100": Fraction(10, 21), "101": Fraction(1, 12), "110": Fraction(5, 6), "111": Fraction(1, 3),
}


def rational_tri3_solution(bits):
    """Temperatures of tri3 by Cramer's rule in exact arithmetic."""
    eps = Fraction(1, 10)
    c = [eps + (1 - eps) * b for b in bits]
    k00, k01, k11 = c[0] + c[1], -c[1], c[1] + c[2]
    det = k00 * k11 - k01 * k01
    return k11 / det, -k01 / det


class TestTri3Table:
    def test_rational_reference_matches_frozen_table(self):
        for s, u in TRI3_U_TARGET.items():
            assert rational_tri3_solution(as_bits(s, 3))[1] == u

    def test_brute_force_values(self, tri3_sys):
        table = brute_force(tri3_sys)
        for x in range(8):
            assert table.u_target[x] == pytest.approx(float(TRI3_U_TARGET[bitstring(x, 3)]), rel=1e-12)
        np.testing.assert_allclose(table.objective, table.u_target ** 2)

    def test_optimum_and_worst(self, tri3_sys):
        table = brute_force(tri3_sys)
        order = table.ranked()
        assert table.best == "101"
        assert bitstring(order[0], 3) == "101"
        assert bitstring(order[-1], 3) == "010"

    def test_b_ainv_b(self, tri3_sys):
        exact = sum(rational_tri3_solution(as_bits(x, 3))[0] for x in range(8)) / 8
        assert exact == Fraction(935, 336)
        assert b_ainv_b(tri3_sys) == pytest.approx(float(exact), rel=1e-13)

    def test_ties_resolve_to_lowest_index(self, tri3_sys):
        table = brute_force(tri3_sys)
        ranked = [bitstring(x, 3) for x in table.ranked()]
        # 001 and 100 tie at 10/21, as do 011 and 110 at 5/6
        assert ranked.index("001") < ranked.index("100")
        assert ranked.index("011") < ranked.index("110")


class TestFiveEdge:
    def test_optimum(self, five_sys):
        table = brute_force(five_sys)
        assert table.best == "11001"
        assert table.u_target[table.argmin] == pytest.approx(2 / 23, rel=1e-12)
        runners = [bitstring(x, 5) for x in table.ranked()[1:3]]
        assert runners == ["11011", "11101"]

    def test_exact_psi_solves_system(self, five_sys):
        from qtopo.operators import BlockOperator
        psi = exact_psi(five_sys)
        b = b_vector(five_sys)
        res = BlockOperator(five_sys).matvec(psi) - b
        assert np.linalg.norm(res) / np.linalg.norm(b) < 1e-12


class TestSolve:
    def test_residual_small(self, five_sys, rng):
        for _ in range(5):
            x = rng.integers(0, 2, five_sys.m)
            U = solve_temperature(five_sys, x)
            assert U.shape == (five_sys.dim,)

    def test_normalisation_radius(self, tri3_sys):
        table = brute_force(tri3_sys)
        assert table.r == pytest.approx(np.linalg.norm(exact_psi(tri3_sys)), rel=1e-12)

    def test_cap(self):
        edges = [(0, 1)] * 4 + [(1, 2)]
        sys_ = assemble(make_structure(edges, source=0, target=1, base=2))
        with pytest.raises(CapExceeded):
            brute_force(sys_, cap=4)
        assert brute_force(sys_, cap=5).m == 5

    def test_single_edge_toy(self):
        sys_ = assemble(make_structure([(0, 2), (0, 1)], source=0, target=1, base=2))
        table = brute_force(sys_)
        assert len(table.structures) == 4


def test_lowest_argmin():
    assert lowest_argmin(np.array([3.0, 1.0, 1.0 + 1e-15, 2.0])) == 1
    assert lowest_argmin(np.array([2.0, 1.0])) == 1
