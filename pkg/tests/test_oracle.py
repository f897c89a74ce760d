import numpy as np
import pytest

from sillopt import oracle
from sillopt.design_space import ArityError, ThicknessVector


def vec(space, scale):
    return ThicknessVector.of([p.min + scale * (p.max - p.min) for p in space.params])


class TestMass:
    def test_zero_vector_is_massless(self, space7, oracle7):
        assert oracle.mass(oracle7, ThicknessVector.of([0.0] * 7)) == 0.0

    def test_doubling_doubles(self, space7, oracle7):
        t = space7.midpoint()
        t2 = ThicknessVector.of([2 * v for v in t.values])
        m1, m2 = oracle.mass(oracle7, t), oracle.mass(oracle7, t2)
        assert m2 == pytest.approx(2 * m1, rel=1e-12)

    def test_midpoint_calibration(self, space7, oracle7):
        assert oracle.mass(oracle7, space7.midpoint()) == pytest.approx(14.5, abs=0.1)

    def test_scaling_linearity(self, space7, oracle7):
        rng = np.random.default_rng(0)
        for _ in range(20):
            t = space7.random_grid_sample(rng)
            alpha = rng.uniform(0, 3)
            scaled = ThicknessVector.of([alpha * v for v in t.values])
            assert oracle.mass(oracle7, scaled) == pytest.approx(
                alpha * oracle.mass(oracle7, t), rel=1e-12, abs=1e-12
            )

    def test_arity_mismatch(self, oracle7):
        with pytest.raises(ArityError):
            oracle.mass(oracle7, ThicknessVector.of([2.0, 2.0]))


class TestEnergy:
    def test_zero_vector_absorbs_nothing(self, oracle7):
        ea_ss, ea_f = oracle.energy(oracle7, ThicknessVector.of([0.0] * 7))
        assert ea_ss == 0.0 and ea_f == 0.0

    def test_midpoint_calibration(self, space7, oracle7):
        ea_ss, ea_f = oracle.energy(oracle7, space7.midpoint())
        assert ea_ss == pytest.approx(800.0, rel=0.05)
        assert ea_f == pytest.approx(600.0, rel=0.05)

    def test_componentwise_monotonicity(self, space7, oracle7):
        rng = np.random.default_rng(1)
        for _ in range(50):
            t = space7.random_grid_sample(rng)
            bigger = ThicknessVector.of(
                [min(v + rng.uniform(0, 0.5), p.max) for v, p in zip(t.values, space7.params)]
            )
            e1 = oracle.energy(oracle7, t)
            e2 = oracle.energy(oracle7, bigger)
            assert e2[0] >= e1[0] and e2[1] >= e1[1]

    def test_bounded_by_scales(self, space7, oracle7):
        t = ThicknessVector.of([p.max for p in space7.params])
        ea_ss, ea_f = oracle.energy(oracle7, t)
        assert ea_ss < oracle7.energy_scale_ss
        assert ea_f < oracle7.energy_scale_f


class TestEvaluate:
    def test_deterministic_without_noise(self, space7, oracle7):
        t = space7.random_grid_sample(5)
        a = oracle.evaluate(oracle7, t)
        b = oracle.evaluate(oracle7, t)
        assert (a.ea_ss, a.ea_f, a.mass, a.pcf) == (b.ea_ss, b.ea_f, b.mass, b.pcf)

    def test_midpoint_total_energy(self, space7, oracle7):
        tri = oracle.evaluate(oracle7, space7.midpoint())
        assert tri.total_energy == pytest.approx(1400.0, rel=0.05)

    def test_noise_seed_contract(self, space7, oracle7):
        t = space7.midpoint()
        noisy = oracle.OracleConfig.from_json_obj({**oracle7.to_json_obj(), "noise_seed": 1})
        noisy2 = oracle.OracleConfig.from_json_obj({**oracle7.to_json_obj(), "noise_seed": 2})
        a, b = oracle.evaluate(noisy, t), oracle.evaluate(noisy, t)
        c = oracle.evaluate(noisy2, t)
        clean = oracle.evaluate(oracle7, t)
        assert (a.ea_ss, a.ea_f, a.mass) == (b.ea_ss, b.ea_f, b.mass)
        assert (a.ea_ss, a.ea_f, a.mass) != (c.ea_ss, c.ea_f, c.mass)
        assert a.ea_ss != clean.ea_ss

    def test_pcf_reported(self, space7, oracle7):
        tri = oracle.evaluate(oracle7, space7.midpoint())
        assert tri.pcf is not None and tri.pcf > 0


class TestCalibration:
    def test_arbitrary_space_calibrates_midpoint(self, space3, oracle3):
        tri = oracle.evaluate(oracle3, space3.midpoint())
        assert tri.mass == pytest.approx(14.5, abs=1e-9)
        assert tri.ea_ss == pytest.approx(800.0, rel=1e-9)
        assert tri.ea_f == pytest.approx(600.0, rel=1e-9)

    def test_has_cross_coupling(self, oracle7):
        q = np.asarray(oracle7.coupling_coeffs)
        off_diag = q - np.diag(np.diag(q))
        assert np.any(off_diag > 0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            oracle.OracleConfig(
                segment_lengths=(100.0,),
                extrusion_length=2.0,
                density=-1.0,
                energy_scale_ss=100.0,
                energy_scale_f=100.0,
                saturation_const=1.0,
                linear_ss=(1.0,),
                linear_f=(1.0,),
                coupling_coeffs=((0.0,),),
            )

    def test_json_round_trip(self, tmp_path, oracle7):
        path = tmp_path / "oracle.json"
        oracle7.save(path)
        loaded = oracle.OracleConfig.load(path)
        assert loaded == oracle7
