from __future__ import annotations

import csv
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from export_path import dump
from src.application.integrator import integrate
from src.application.noise import (
    deterministic_path,
    downsample,
    generate_path,
    increments,
    path_rows,
    refine,
    refine_to,
    standard_normals,
)
from src.application.registry import get_model_spec
from src.domain.entities import ContactState
from src.domain.errors import ConfigError

DATA = Path(__file__).parent / "data"


class TestGeneratePath:

    def test_same_seed_is_bit_identical(self):
        a = generate_path(7, 2, 50, 0.1)
        b = generate_path(7, 2, 50, 0.1)
        np.testing.assert_array_equal(a.values, b.values)

    def test_different_seeds_differ(self):
        assert not np.array_equal(generate_path(1, 1, 20, 0.1).values, generate_path(2, 1, 20, 0.1).values)

    def test_starts_at_zero(self):
        path = generate_path(3, 3, 10, 0.5)
        assert path.values.shape == (11, 3)
        np.testing.assert_array_equal(path.values[0], np.zeros(3))

    def test_zero_processes(self):
        path = generate_path(3, 0, 10, 0.1)
        assert path.values.shape == (11, 0)
        assert increments(path).shape == (10, 0)

    def test_increment_moments(self):
        N, h = 10_000, 0.01
        dW = increments(generate_path(42, 1, N, h))[:, 0]
        assert abs(dW.mean()) <= 4 * np.sqrt(h) / np.sqrt(N)
        assert dW.var() == pytest.approx(h, rel=0.1)

    def test_increments_are_normal(self):
        h = 0.02
        dW = increments(generate_path(2024, 1, 100_000, h))[:, 0]
        assert stats.kstest(dW / np.sqrt(h), "norm").pvalue > 0.01

    def test_columns_use_distinct_stream_positions(self):
        xi = standard_normals(11, 0, 4, 2)
        flat = standard_normals(11, 0, 8, 1)
        np.testing.assert_array_equal(xi.reshape(-1), flat[:, 0])

    @pytest.mark.parametrize("kwargs", [
        {"seed": 1, "m": 1, "N": 0, "h": 0.1},
        {"seed": 1, "m": 1, "N": 10, "h": 0.0},
        {"seed": 1, "m": -1, "N": 10, "h": 0.1},
        {"seed": -1, "m": 1, "N": 10, "h": 0.1},
        {"seed": 2 ** 64, "m": 1, "N": 10, "h": 0.1},
    ])
    def test_rejects_bad_arguments(self, kwargs):
        with pytest.raises(ConfigError):
            generate_path(**kwargs)


class TestIncrements:

    def test_zero_path(self):
        np.testing.assert_array_equal(increments(deterministic_path(5, 0.1)), np.zeros((5, 0)))

    def test_telescoping(self):
        path = generate_path(5, 2, 40, 0.1)
        np.testing.assert_allclose(increments(path).sum(axis=0), path.values[-1] - path.values[0], atol=1e-12)

    def test_cumulative_sum_reconstructs(self):
        path = generate_path(7, 1, 200, 0.1)
        rebuilt = np.vstack([np.zeros((1, 1)), np.cumsum(increments(path), axis=0)])
        np.testing.assert_allclose(rebuilt, path.values, atol=1e-12)


class TestRefine:

    def test_even_nodes_are_parent(self):
        parent = generate_path(9, 2, 30, 0.1)
        child = refine(parent)
        assert (child.N, child.level) == (60, 1)
        assert child.h == pytest.approx(0.05)
        np.testing.assert_array_equal(child.values[0::2], parent.values)

    def test_odd_nodes_are_not_plain_midpoints(self):
        parent = generate_path(9, 1, 30, 0.1)
        child = refine(parent)
        midpoints = 0.5 * (parent.values[:-1] + parent.values[1:])
        assert not np.allclose(child.values[1::2], midpoints)

    def test_refine_twice(self):
        base = generate_path(13, 1, 25, 0.2)
        np.testing.assert_array_equal(refine(refine(base)).values[0::4], base.values)

    def test_refinement_is_reproducible(self):
        base = generate_path(17, 1, 10, 0.1)
        np.testing.assert_array_equal(refine_to(base, 3).values, refine_to(base, 3).values)

    def test_downsampling_recovers_base(self):
        for seed in range(100):
            base = generate_path(seed, 1, 16, 0.1)
            fine = refine_to(base, 3)
            np.testing.assert_array_equal(downsample(fine, 3), base.values)

    def test_fine_increments_sum_to_coarse(self):
        for seed in range(100):
            base = generate_path(seed, 1, 16, 0.1)
            fine = increments(refine(base))
            coarse = increments(base)
            np.testing.assert_allclose(fine[0::2] + fine[1::2], coarse, atol=1e-13)

    def test_bridge_variance(self):
        # the odd-node deviation from the midpoint has variance h/4
        base = generate_path(99, 1, 50_000, 0.04)
        child = refine(base)
        deviation = child.values[1::2, 0] - 0.5 * (base.values[:-1, 0] + base.values[1:, 0])
        assert deviation.var() == pytest.approx(0.01, rel=0.05)


class TestExport:

    def test_rows(self):
        header, rows = path_rows(generate_path(1, 2, 3, 0.5))
        assert header == ["t", "W1", "W2"]
        assert len(rows) == 4
        assert [r[0] for r in rows] == [0.0, 0.5, 1.0, 1.5]
        assert rows[0][1:] == [0.0, 0.0]

    def test_dump_writes_header_and_rows(self, tmp_path):
        output = dump(seed=3, m=2, N=10, h=0.1, levels=1, output=tmp_path / "path.csv")
        with open(output, newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["t", "W1", "W2"]
        assert len(rows) == 1 + 21
        assert rows[1] == ["0", "0", "0"]
        assert float(rows[-1][0]) == pytest.approx(1.0)


class TestSeed42Reference:
    """Seed-42 values computed independently of numpy and scipy from the documented stream layout."""

    @pytest.fixture(scope="class")
    def table(self):
        with open(DATA / "wiener_seed42.csv", newline="", encoding="utf-8") as f:
            return list(csv.DictReader(f))

    def test_path_values(self, table):
        path = generate_path(42, 1, 200, 0.1)
        expected = np.array([float(r["W1"]) for r in table])
        np.testing.assert_allclose(path.values[:, 0], expected, rtol=1e-12, atol=1e-12)

    def test_bridge_midpoints(self, table):
        child = refine(generate_path(42, 1, 200, 0.1))
        expected = np.array([float(r["W1_bridge"]) for r in table[:-1]])
        np.testing.assert_allclose(child.values[1::2, 0], expected, rtol=1e-12, atol=1e-12)

    def test_additive_contact_action(self, table):
        spec = get_model_spec("damped-oscillator-additive")
        stepper = spec.stepper(spec.model(), "contact")
        trajectory = integrate(stepper, ContactState(q=[0.75], p=[-0.25], s=0.08), generate_path(42, 1, 200, 0.1))
        expected = np.array([float(r["s"]) for r in table])
        np.testing.assert_allclose([state.s for state in trajectory.states], expected, rtol=1e-12, atol=1e-12)
