import math

import pytest

from dpbayes import oracle
from dpbayes.bayesfactor import log_ratio, ratio_chi2, ratio_t
from dpbayes.oracle import (
    FixtureRow,
    QuadratureControl,
    oracle_ratio_chi2,
    oracle_ratio_f,
    oracle_ratio_t,
    oracle_ratio_z,
    prior_mass,
    read_fixtures,
    write_fixtures,
)


def closed_form(row):
    return math.exp(log_ratio(row.family, row.params[0], *row.params[1:], tau2=row.tau2))


class TestTrivialCases:
    def test_z_at_zero(self):
        assert oracle_ratio_z(0.0, 3.0) == pytest.approx(0.125, abs=1e-8)

    def test_z_degenerate(self):
        assert oracle_ratio_z(0.0, 1e-12) == pytest.approx(1.0, abs=1e-6)

    def test_chi2_near_zero(self):
        assert oracle_ratio_chi2(1e-8, 3.0, 1.0) == pytest.approx(ratio_chi2(0.0, 3.0, 1.0), rel=1e-6)

    def test_chi2_degenerate(self):
        assert oracle_ratio_chi2(5.0, 3.0, 1e-12) == pytest.approx(1.0, abs=1e-6)

    def test_t_at_zero(self):
        assert oracle_ratio_t(0.0, 10.0, 3.0) == pytest.approx(0.125, rel=1e-5)

    def test_t_degenerate(self):
        assert oracle_ratio_t(2.0, 10.0, 1e-12) == pytest.approx(1.0, abs=1e-4)

    def test_f_degenerate(self):
        assert oracle_ratio_f(0.5, 2.0, 20.0, 1e-12) == pytest.approx(1.0, abs=1e-4)

    def test_f_at_zero(self):
        assert oracle_ratio_f(0.0, 2.0, 20.0, 1.0) == pytest.approx(0.25, rel=1e-5)

    @pytest.mark.parametrize("t", [-3.0, 2.5])
    def test_t_off_grid(self, t):
        assert oracle_ratio_t(t, 7.0, 4.0) == pytest.approx(ratio_t(t, 7.0, 4.0), rel=1e-5)


class TestPriors:
    @pytest.mark.parametrize("tau2", [1e-6, 0.5, 8.0, 50.0, 1e4])
    @pytest.mark.parametrize("prior", ["normal_moment", "skewed_normal_moment"])
    def test_symmetric_priors_normalized(self, prior, tau2):
        assert prior_mass(prior, tau2) == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.parametrize("tau2", [1e-6, 1.0, 10.0, 50.0])
    @pytest.mark.parametrize("shape", [1.5, 2.5, 5.5, 3.5])
    def test_gamma_prior_normalized(self, shape, tau2):
        assert prior_mass("gamma", tau2, shape) == pytest.approx(1.0, abs=1e-9)

    def test_skewed_prior_weights(self):
        assert oracle.skewed_normal_moment_pdf(1.0, 2.0) == pytest.approx(3 * oracle.skewed_normal_moment_pdf(-1.0, 2.0))


class TestFixtures:
    def test_fixture_file_covers_every_grid(self):
        rows = read_fixtures()
        assert {r.family for r in rows} == {"z", "t", "chi2", "f"}
        assert len(rows) == sum(len(g) for g in oracle.GRIDS.values())

    def test_closed_forms_match_fixtures(self):
        for row in read_fixtures():
            assert abs(closed_form(row) - row.value) / row.value <= row.accuracy, row.label()

    def test_roundtrip(self, tmp_path):
        rows = [FixtureRow("z", (1.0,), 0.5, 0.1234567890123456789, 1e-6), FixtureRow("f", (1.0, 2.0, 20.0), 1.0, 3.0, 1e-5)]
        path = write_fixtures(rows, tmp_path / "fx.txt")
        assert read_fixtures(path) == rows
        assert "0.12345678901234568" in path.read_text()

    def test_unknown_family(self, tmp_path):
        path = tmp_path / "fx.txt"
        path.write_text("q, 1, 2, 3, 4\n")
        with pytest.raises(ValueError, match="1"):
            read_fixtures(path)

    def test_regenerated_values_match_frozen(self):
        rows = read_fixtures()
        fresh = oracle.compute_fixture_rows(families=["z", "chi2"])
        frozen = {(r.family, r.params, r.tau2): r.value for r in rows}
        for r in fresh:
            assert r.value == pytest.approx(frozen[(r.family, r.params, r.tau2)], rel=1e-12)


class TestQuadratureControl:
    @pytest.mark.parametrize(
        "kwargs", [{"abs_tolerance": 1e-9}, {"abs_tolerance": 0.0}, {"integration_halfwidth": 9.0}, {"max_subdivisions": 0}]
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            QuadratureControl(**kwargs)

    @pytest.mark.parametrize(
        "family,params,tau2",
        [("z", (3.0,), 5.0), ("chi2", (12.0, 3.0), 8.0), ("t", (-3.0, 24.0), 6.0), ("f", (6.5, 2.0, 47.0), 10.0)],
    )
    def test_halving_tolerance_is_stable(self, family, params, tau2):
        coarse = oracle.oracle_ratio(family, params, tau2, QuadratureControl(abs_tolerance=1e-10))
        fine = oracle.oracle_ratio(family, params, tau2, QuadratureControl(abs_tolerance=5e-11))
        assert abs(coarse - fine) / fine < oracle.ACCURACY[family]

    def test_invalid_inputs(self):
        with pytest.raises(ValueError):
            oracle_ratio_z(1.0, 0.0)
        with pytest.raises(ValueError):
            oracle_ratio_chi2(-1.0, 3.0, 1.0)
