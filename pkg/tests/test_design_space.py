import json

import numpy as np
import pytest

from sillopt.design_space import (
    DECREMENT,
    INCREMENT,
    ArityError,
    DesignAction,
    DesignSpace,
    GridSizeError,
    ParameterSpec,
    ThicknessVector,
    default_space,
)


def tiny_space(levels=5):
    return DesignSpace.of(
        [
            ParameterSpec("a", 1.0, 2.0, 1.0 / (levels - 1)),
            ParameterSpec("b", 0.0, 4.0, 4.0 / (levels - 1)),
            ParameterSpec("c", 2.0, 3.0, 1.0 / (levels - 1)),
        ]
    )


class TestParameterSpec:
    def test_levels(self):
        assert ParameterSpec("t1", 1.5, 3.0, 0.1).levels == 16
        assert ParameterSpec("t4", 1.0, 3.0, 0.1).levels == 21

    def test_invalid_bounds(self):
        with pytest.raises(ValueError):
            ParameterSpec("x", 2.0, 1.0, 0.1)
        with pytest.raises(ValueError):
            ParameterSpec("x", 1.0, 2.0, 0.0)

    def test_step_must_divide_range(self):
        with pytest.raises(ValueError):
            ParameterSpec("x", 1.0, 2.05, 0.1)

    def test_index_round_trip(self):
        p = ParameterSpec("t2", 2.0, 4.0, 0.2)
        for k in range(p.levels):
            assert p.index_of(p.value_at(k)) == k


class TestValidate:
    def test_min_bound_is_valid(self, space7):
        t = space7.midpoint()
        t = ThicknessVector.of([1.5, *t.values[1:]])
        assert space7.validate(t)

    def test_above_max_invalid(self, space7):
        t = ThicknessVector.of([3.1, 3.0, 3.0, 2.0, 2.5, 3.0, 3.0])
        assert not space7.validate(t)

    def test_all_max_valid(self, space7):
        t = ThicknessVector.of([p.max for p in space7.params])
        assert space7.validate(t)

    def test_arity_mismatch(self, space7):
        with pytest.raises(ArityError):
            space7.validate(ThicknessVector.of([2.0, 2.0]))


class TestClamp:
    def test_below_min(self, space7):
        t = ThicknessVector.of([2.0, 3.0, 3.0, 0.5, 2.5, 3.0, 3.0])
        assert space7.clamp(t).values[3] == 1.0

    def test_identity_in_range(self, space7):
        t = space7.midpoint()
        assert space7.clamp(t) == t

    def test_above_max(self, space7):
        t = ThicknessVector.of([2.0, 5.0, 3.0, 2.0, 2.5, 3.0, 3.0])
        assert space7.clamp(t).values[1] == 4.0


class TestRandomGridSample:
    def test_valid_and_aligned(self, space7):
        for seed in range(25):
            t = space7.random_grid_sample(seed)
            assert space7.validate(t)
            assert space7.is_grid_aligned(t)

    def test_deterministic(self, space7):
        assert space7.random_grid_sample(42) == space7.random_grid_sample(42)

    def test_uniform_mean(self, space7):
        rng = np.random.default_rng(7)
        vals = [space7.random_grid_sample(rng).values[0] for _ in range(10_000)]
        assert abs(np.mean(vals) - 2.25) <= 0.02 * 2.25


class TestApplyAction:
    def test_increment_moves_one_step(self, space7):
        t = ThicknessVector.of([1.5, 2.0, 2.0, 1.0, 1.5, 2.0, 2.0])
        t2 = space7.apply_action(t, DesignAction(0, INCREMENT))
        assert t2.values[0] == pytest.approx(1.6)
        assert t2.values[1:] == t.values[1:]

    def test_saturates_at_min(self, space7):
        t = ThicknessVector.of([1.5, 2.0, 2.0, 1.0, 1.5, 2.0, 2.0])
        assert space7.apply_action(t, DesignAction(3, DECREMENT)) == t

    def test_saturates_at_max(self, space7):
        t = ThicknessVector.of([3.0, 4.0, 4.0, 3.0, 3.5, 4.0, 4.0])
        assert space7.apply_action(t, DesignAction(5, INCREMENT)) == t

    def test_inverse_action_returns_original(self, space7):
        rng = np.random.default_rng(3)
        for _ in range(50):
            t = space7.random_grid_sample(rng)
            i = int(rng.integers(len(space7)))
            d = INCREMENT if rng.random() < 0.5 else DECREMENT
            moved = space7.apply_action(t, DesignAction(i, d))
            if moved == t:  # saturated; inverse need not apply
                continue
            back = space7.apply_action(moved, DesignAction(i, -d))
            assert back == t

    def test_no_float_drift_after_many_actions(self, space7):
        t = ThicknessVector.of([1.5, 2.0, 2.0, 1.0, 1.5, 2.0, 2.0])
        for _ in range(400):
            t = space7.apply_action(t, DesignAction(0, INCREMENT))
        assert t.values[0] == 3.0  # exactly, via integer grid indices


class TestEnumerateGrid:
    def test_tiny_count(self):
        space = tiny_space(5)
        grid = list(space.enumerate_grid())
        assert len(grid) == 125
        assert len(set(g.values for g in grid)) == 125

    def test_single_param_values(self):
        space = DesignSpace.of([ParameterSpec("x", 1.0, 1.2, 0.1)])
        vals = [t.values[0] for t in space.enumerate_grid()]
        assert vals == pytest.approx([1.0, 1.1, 1.2])

    def test_full_space_refused(self, space7):
        assert space7.grid_size > 10**6
        with pytest.raises(GridSizeError, match=str(space7.grid_size)):
            next(space7.enumerate_grid())

    def test_lexicographic_order(self):
        space = tiny_space(3)
        grid = list(space.enumerate_grid())
        idx = [space.indices_of(t) for t in grid]
        assert idx == sorted(idx)


class TestSnapNormalize:
    def test_snap_to_nearest(self, space7):
        t = ThicknessVector.of([1.54, 2.11, 3.99, 1.02, 3.49, 2.0, 4.0])
        snapped = space7.snap(t)
        assert space7.is_grid_aligned(snapped)
        assert snapped.values[0] == pytest.approx(1.5)
        assert snapped.values[1] == pytest.approx(2.2)

    def test_snap_clamps_out_of_bounds(self, space7):
        t = ThicknessVector.of([0.0, 9.0, 3.0, 2.0, 2.5, 3.0, 3.0])
        snapped = space7.snap(t)
        assert snapped.values[0] == 1.5
        assert snapped.values[1] == 4.0

    def test_normalize_endpoints(self, space7):
        lo = ThicknessVector.of([p.min for p in space7.params])
        hi = ThicknessVector.of([p.max for p in space7.params])
        assert space7.normalize(lo) == pytest.approx(np.zeros(7))
        assert space7.normalize(hi) == pytest.approx(np.ones(7))


def test_default_space_matches_shipped_ranges(space7):
    assert space7.names == ("t1", "t2", "t3", "t4", "t5", "t6", "t7")
    assert [p.levels for p in space7.params] == [16, 11, 11, 21, 21, 11, 11]


def test_json_round_trip_preserves_order(tmp_path, space7):
    path = tmp_path / "space.json"
    space7.save(path)
    loaded = DesignSpace.load(path)
    assert loaded == space7
    # serialization is an ordered list
    raw = json.loads(path.read_text())
    assert [d["name"] for d in raw] == list(space7.names)
