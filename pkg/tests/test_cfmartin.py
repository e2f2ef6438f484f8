"""Tests for the continued-fraction algorithm."""

import math

import pytest

from elliptic_dedekind.cfmartin import (
    AdmissibleSet,
    cf_step,
    check_determinants,
    check_growth,
    check_integrality,
    continued_fraction_display,
    covering_epsilon,
    default_admissible,
    default_denominators,
    expand,
    expansion_report,
    step_candidates,
)
from elliptic_dedekind.errors import (
    InadmissibleEpsilonError,
    InvariantViolationError,
    RationalPointReached,
)
from elliptic_dedekind.qfield import KElement, make_field

Z_SAMPLE = complex(math.pi - 3, math.e - 2)
INTEGRALITY_POINTS = [complex(0.3, 0.7), complex(-1.12, 0.4), Z_SAMPLE]


class TestAdmissibleSet:
    """Tests for admissible sets and covering thresholds."""

    @pytest.mark.parametrize("D,expected", [(2, [1, 2]), (7, [1, 2]), (3, [1]), (5, [1, 2, 3, 4])])
    def test_default_denominators(self, D, expected):
        """Test B = {1, ..., floor(sqrt|d_K|)}."""
        K = make_field(D)
        assert [b.x for b in default_denominators(K)] == expected

    @pytest.mark.parametrize("D,radius", [(3, 1 / math.sqrt(3)), (2, math.sqrt(3) / 2)])
    def test_covering_radius_of_units(self, D, radius):
        """Test B = {1} recovers the covering radius of the lattice."""
        K = make_field(D)
        assert covering_epsilon([K.one], K) == pytest.approx(radius, abs=1e-3)

    def test_more_denominators_cover_better(self, field2):
        """Test adding b = 2 cannot increase the threshold."""
        one = covering_epsilon([field2.one], field2)
        both = covering_epsilon([field2.one, field2.elt(2)], field2)
        assert both <= one + 1e-9

    def test_rejects_eps_below_threshold(self, field2):
        """Test eps under the covering radius raises."""
        with pytest.raises(InadmissibleEpsilonError):
            default_admissible(field2, 0.8, [field2.one])

    @pytest.mark.parametrize("eps", [0.0, 1.0, 1.2])
    def test_rejects_eps_outside_unit_interval(self, field2, eps):
        """Test eps must lie in (0, 1)."""
        with pytest.raises(InadmissibleEpsilonError):
            default_admissible(field2, eps)

    def test_zeta(self, field2):
        """Test zeta = (1 - eps^2)^2 / (4 eps^2 mu^2)."""
        adm = AdmissibleSet(B=(field2.one,), eps=0.5, mu=1.0)
        assert adm.zeta == pytest.approx(0.5625)

    def test_mu(self, adm2):
        """Test mu = max |b|."""
        assert adm2.mu == 2.0
        assert adm2.threshold < adm2.eps


class TestStep:
    """Tests for cf_step."""

    def test_step_residual(self, field2, adm2):
        """Test the chosen pair satisfies |b z - a| <= eps."""
        a, b, z_next = cf_step(Z_SAMPLE, field2.one, adm2)
        assert abs(b.to_complex() * Z_SAMPLE - a.to_complex()) <= adm2.eps
        assert abs(complex(z_next)) >= 1 / adm2.eps

    def test_unit_first_prefers_one(self, field2, adm2):
        """Test unit_first picks b = 1 when it is feasible."""
        _, b, _ = cf_step(Z_SAMPLE, field2.one, adm2, policy="unit_first")
        assert b == field2.one

    def test_rational_point(self, field2, adm2):
        """Test a point of K is reported."""
        with pytest.raises(RationalPointReached):
            cf_step(complex(0.5, 0), field2.one, adm2)

    def test_no_integral_step(self, field2, adm2):
        """Test a step with every candidate filtered out raises."""
        with pytest.raises(InvariantViolationError) as e:
            cf_step(Z_SAMPLE, field2.elt(2), adm2, keeps_integral=lambda a, b: False)
        assert e.value.name == "integrality"

    def test_candidates_respect_filter(self, field2, adm2):
        """Test every candidate lies in the disc and passes the filter."""
        options = step_candidates(
            Z_SAMPLE, field2.elt(2), adm2, keeps_integral=lambda a, b: b == field2.one
        )
        assert options
        for a, b in options:
            assert b == field2.one
            assert abs(Z_SAMPLE - a.to_complex()) <= adm2.eps

    def test_wider_disc(self, field2, adm2):
        """Test a larger radius keeps every candidate of the eps-disc."""
        narrow = step_candidates(Z_SAMPLE, field2.one, adm2)
        wide = step_candidates(Z_SAMPLE, field2.one, adm2, radius=2 * adm2.eps)
        assert len(wide) > len(narrow)
        assert all(c in wide for c in narrow)

    def test_unknown_policy(self, field2, adm2):
        """Test an unknown policy raises."""
        with pytest.raises(ValueError):
            cf_step(Z_SAMPLE, field2.one, adm2, policy="random")  # type: ignore[arg-type]


class TestExpand:
    """Tests for expansions and their monitors."""

    @pytest.mark.parametrize("policy", ["greedy", "unit_first"])
    def test_determinants(self, field2, adm2, policy):
        """Test det M_n = (-1)^n b_n at every step."""
        exp = expand(Z_SAMPLE, 12, field2, adm2, policy=policy)
        assert len(exp) == 12
        assert check_determinants(exp) == 13

    def test_growth_bounds(self, field2, adm2):
        """Test the remainder, residual, growth and approximation bounds."""
        exp = expand(Z_SAMPLE, 12, field2, adm2)
        report = check_growth(exp)
        assert report.passed
        assert report.checks > 0
        assert report.min_margin_remainder >= 1 - 1e-12

    def test_growth_bounds_other_field(self, field7):
        """Test the bounds for w = (1 + sqrt(-7))/2."""
        adm = default_admissible(field7, 0.9)
        exp = expand(complex(0.123, 0.456), 10, field7, adm)
        assert check_growth(exp).passed

    def test_convergents_approach_z(self, field2, adm2):
        """Test p_n/q_n gets closer to z."""
        exp = expand(Z_SAMPLE, 12, field2, adm2)
        assert exp.approx_error(12) < exp.approx_error(1)
        assert abs(exp.convergent(12).to_complex() - Z_SAMPLE) == pytest.approx(
            exp.approx_error(12), abs=1e-12
        )

    def test_unit_first_stays_integral(self, field2, adm2):
        """Test b_n = 1 keeps every convergent matrix integral."""
        exp = expand(Z_SAMPLE, 12, field2, adm2, policy="unit_first")
        assert all(b == field2.one for b in exp.b)
        assert exp.integral_upto == 12

    def test_point_of_k_terminates(self, field2, adm2):
        """Test an element of K ends the expansion at itself."""
        exp = expand(complex(0.5, 0), 10, field2, adm2)
        assert exp.terminated
        assert exp.convergent(len(exp)) == field2.parse_k("1/2")

    def test_rejects_zero_depth(self, field2, adm2):
        """Test n_max must be positive."""
        with pytest.raises(ValueError):
            expand(Z_SAMPLE, 0, field2, adm2)

    def test_display_value(self, field2, adm2):
        """Test the nested display evaluates to the last convergent."""
        exp = expand(Z_SAMPLE, 6, field2, adm2)
        text, value = continued_fraction_display(exp)
        assert value == exp.convergent(6)
        assert "/" in text

    def test_report(self, field2, adm2):
        """Test the JSON layout of an expansion."""
        exp = expand(Z_SAMPLE, 5, field2, adm2)
        report = expansion_report(exp, display=True)
        assert report.D == 2
        assert len(report.steps) == 5
        assert all(step.det_check for step in report.steps)
        assert report.display is not None
        assert report.steps[0].n == 1
        assert report.steps[-1].p == str(exp.p(5))


class TestIntegrality:
    """Tests for integral convergent matrices."""

    @pytest.mark.parametrize("D", [5, 6, 10, 15])
    @pytest.mark.parametrize("policy", ["greedy", "unit_first"])
    def test_convergents_stay_integral(self, D, policy):
        """Test every M_n has entries in O_K and the bounds still hold."""
        K = make_field(D)
        adm = default_admissible(K, 0.9)
        for z in INTEGRALITY_POINTS:
            exp = expand(z, 15, K, adm, policy=policy)
            assert len(exp) == 15
            assert exp.integral_upto == 15
            assert check_integrality(exp) == 16
            assert check_determinants(exp) == 16
            assert check_growth(exp).passed

    def test_fractional_entry_is_reported(self, field2, adm2):
        """Test the monitor names the first matrix leaving O_K."""
        exp = expand(Z_SAMPLE, 6, field2, adm2)
        exp.P[-1] = exp.P[-1] + KElement.make(field2.one, 2)
        with pytest.raises(InvariantViolationError) as e:
            check_integrality(exp)
        assert e.value.name == "integrality"
        assert e.value.index == 6

    def test_uncovered_plane(self, field2):
        """Test an eps below the covering radius stops the expansion."""
        adm = AdmissibleSet(B=(field2.one,), eps=0.05, mu=1.0)
        with pytest.raises(InvariantViolationError) as e:
            expand(Z_SAMPLE, 5, field2, adm)
        assert e.value.name == "covering"
