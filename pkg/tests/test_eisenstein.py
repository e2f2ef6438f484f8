"""Tests for E_1, E_2(0) and the Weierstrass zeta function."""

import math

import numpy as np
import pytest

from elliptic_dedekind.eisenstein import (
    ROUNDING_BOUND,
    e1,
    e1_direct,
    e1_many,
    e1_table,
    e2_zero,
    e2_zero_direct,
    eta_omega,
    make_context,
    weierstrass_zeta,
)
from elliptic_dedekind.errors import (
    BudgetExceededError,
    PoleError,
    PrecisionError,
    ZeroModulusError,
)
from elliptic_dedekind.qfield import coset_reps, make_field

POINTS = [complex(0.31, 0.17), complex(-0.42, 0.55), complex(0.05, -0.6), complex(0.49, 0.01)]


class TestContext:
    """Tests for make_context."""

    @pytest.mark.parametrize("D", [1, 3])
    def test_e2_vanishes(self, D):
        """Test E_2(0) = 0 for the square and hexagonal lattices."""
        ctx = make_context(make_field(D))
        assert abs(e2_zero(ctx)) < 1e-9

    @pytest.mark.parametrize("D", [2, 5, 7, 15])
    def test_e2_nonzero_and_real(self, D):
        """Test E_2(0) is real and nonzero otherwise."""
        ctx = make_context(make_field(D))
        assert abs(ctx.s2) > 1e-3
        assert abs(ctx.s2.imag) < 1e-12

    def test_square_lattice_quasi_period(self):
        """Test eta_1 = pi for Z[i]."""
        ctx = make_context(make_field(1))
        assert ctx.eta1 == pytest.approx(math.pi, abs=1e-12)

    def test_legendre_relation(self, ctx7):
        """Test eta_1 w - eta_w = 2 pi i."""
        assert ctx7.eta1 * ctx7.tau - eta_omega(ctx7) == pytest.approx(2j * math.pi)

    def test_error_bound(self, ctx2):
        """Test the certified error covers rounding."""
        assert ROUNDING_BOUND <= ctx2.err_bound <= ctx2.prec

    def test_precision_too_tight(self, field2):
        """Test a precision below the certified error raises."""
        with pytest.raises(PrecisionError):
            make_context(field2, prec=1e-15)

    @pytest.mark.parametrize("D", [2, 5, 7])
    def test_matches_lattice_sum(self, D):
        """Test the closed form against the regularised lattice sum."""
        K = make_field(D)
        ctx = make_context(K)
        assert abs(e2_zero_direct(K) - ctx.s2) < 1e-4


class TestZeta:
    """Tests for the Weierstrass zeta function."""

    def test_quasi_periods(self, ctx2):
        """Test zeta(z + 1) - zeta(z) = eta_1 and zeta(z + w) - zeta(z) = eta_w."""
        z = complex(0.2, 0.3)
        base = weierstrass_zeta(z, ctx2)
        assert weierstrass_zeta(z + 1, ctx2) - base == pytest.approx(ctx2.eta1, abs=1e-9)
        assert weierstrass_zeta(z + ctx2.tau, ctx2) - base == pytest.approx(
            eta_omega(ctx2), abs=1e-9
        )

    def test_pole(self, ctx2):
        """Test lattice points raise."""
        with pytest.raises(PoleError):
            weierstrass_zeta(1 + ctx2.tau, ctx2)

    def test_laurent_leading_term(self, ctx7):
        """Test zeta(z) ~ 1/z near 0."""
        z = complex(1e-4, 2e-4)
        assert abs(weierstrass_zeta(z, ctx7) - 1 / z) < 1e-3


class TestE1:
    """Tests for E_1."""

    @pytest.mark.parametrize("z", POINTS)
    def test_periodic(self, ctx7, z):
        """Test E_1 is O_K-periodic."""
        base = e1(z, ctx7)
        assert abs(e1(z + 1, ctx7) - base) < 1e-9
        assert abs(e1(z + ctx7.tau, ctx7) - base) < 1e-9
        assert abs(e1(z - 3 + 2 * ctx7.tau, ctx7) - base) < 1e-9

    @pytest.mark.parametrize("z", POINTS)
    def test_quarter_turn(self, z):
        """Test E_1(iz) = -i E_1(z) on the square lattice."""
        ctx = make_context(make_field(1))
        assert abs(e1(1j * z, ctx) + 1j * e1(z, ctx)) < 1e-9

    @pytest.mark.parametrize("z", POINTS)
    def test_odd(self, ctx2, z):
        """Test E_1(-z) = -E_1(z)."""
        assert abs(e1(-z, ctx2) + e1(z, ctx2)) < 1e-9

    @pytest.mark.parametrize("z", POINTS)
    def test_conjugation(self, ctx7, z):
        """Test E_1(conj z) = conj E_1(z)."""
        assert abs(e1(z.conjugate(), ctx7) - e1(z, ctx7).conjugate()) < 1e-9

    def test_zero_on_lattice(self, ctx2):
        """Test E_1 vanishes on O_K."""
        assert e1(0, ctx2) == 0
        assert e1(1 + ctx2.tau, ctx2) == 0

    def test_half_periods(self, ctx2):
        """Test E_1 vanishes at 2-torsion points."""
        for h in (0.5, ctx2.tau / 2, (1 + ctx2.tau) / 2):
            assert abs(e1(h, ctx2)) < 1e-9

    def test_vectorised(self, ctx7):
        """Test e1_many agrees with e1."""
        values = e1_many(POINTS, ctx7)
        for z, v in zip(POINTS, values):
            assert v == pytest.approx(e1(z, ctx7), abs=1e-12)

    @pytest.mark.parametrize("z", POINTS[:2])
    def test_matches_lattice_sum(self, ctx2, z):
        """Test the q-series against the Weierstrass sum."""
        assert abs(e1_direct(z, ctx2) - e1(z, ctx2)) < 1e-6

    def test_counter(self, ctx2):
        """Test evaluations are counted."""
        before = ctx2.counter.count
        e1_many(POINTS, ctx2)
        assert ctx2.counter.count == before + len(POINTS)


class TestE1Table:
    """Tests for e1_table."""

    def test_matches_pointwise(self, field7, ctx7):
        """Test table entries equal E_1(mu/c)."""
        c = field7.elt(3, 1)
        table = coset_reps(c)
        values = e1_table(c, ctx7, table=table)
        assert values.shape == (c.norm(),)
        assert values[0] == 0
        for k, mu in enumerate(table.reps):
            expected = e1(mu.to_complex() / c.to_complex(), ctx7)
            assert abs(values[k] - expected) < 1e-8

    def test_sum_vanishes(self, field2, ctx2):
        """Test E_1 summed over the c-torsion points is 0."""
        values = e1_table(field2.elt(2, 1), ctx2)
        assert abs(np.sum(values)) < 1e-8

    def test_zero_modulus(self, field2, ctx2):
        """Test the zero modulus raises."""
        with pytest.raises(ZeroModulusError):
            e1_table(field2.zero, ctx2)

    def test_budget(self, field2, ctx2):
        """Test the coset budget is enforced."""
        with pytest.raises(BudgetExceededError):
            e1_table(field2.elt(10, 3), ctx2, budget=50)

