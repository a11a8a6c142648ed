"""Qualitative ordering checks at desk scale (64 and 128, five seeds)

These take minutes rather than seconds; run them with
./scripts/run_functional_tests.sh rather than the unit suite.
"""
import sys
import os
import unittest

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.dirname(os.path.abspath(__file__)))))

from harness import (ExperimentConfig, run_depth_ablation, run_n_ablation, run_padding_ablation,
                     run_resolution_grid)


def desk_config(**overrides):
    values = dict(sizes=[64, 128], depth=8, channels=16, seeds=5, seed=0)
    values.update(overrides)
    return ExperimentConfig(**values)


class TestPaddingOrdering(unittest.TestCase):
    """Zero padding leaks the most absolute position"""

    @classmethod
    def setUpClass(cls):
        cls.report = run_padding_ablation(desk_config())

    def loss(self, label):
        return self.report.find(label)["loss_mean"]

    def test_zero_below_other_modes(self):
        for mode in ("circular", "reflect", "replicate"):
            self.assertLess(self.loss("zero"), self.loss(mode), mode)

    def test_below_random_floor(self):
        floor = self.loss("floor")
        for row in self.report.rows:
            self.assertLessEqual(row["loss_mean"], floor + 0.01, row["label"])
        self.assertGreater(self.loss("random"), self.loss("zero"))


_grid_cache = {}


def resolution_report():
    """Shared desk-scale resolution grid; computed once per test run"""
    if "report" not in _grid_cache:
        _grid_cache["report"] = run_resolution_grid(desk_config())
    return _grid_cache["report"]


class GridLosses:

    def loss(self, label, region="whole", size=128):
        return resolution_report().find(label, region, size)["loss_mean"]


class TestResolutionOrdering(GridLosses, unittest.TestCase):
    """Position information in the central crop of a doubled map"""

    def test_central_crop_loses_position(self):
        self.assertGreater(self.loss("zero", "central-64"), self.loss("zero", size=64))

    def test_random_above_zero(self):
        self.assertGreater(self.loss("random", size=64), self.loss("zero", size=64))


class TestPbcCorrection(GridLosses, unittest.TestCase):
    """Virtual boundaries put position information back into the central crop"""

    def test_pbc_restores_position(self):
        for mode in ("wholepatch", "crossboundary"):
            label = f"pbc-{mode}-N3-r0"
            self.assertLess(self.loss(label, "central-64"), self.loss("zero", "central-64"),
                            label)

    def test_dilation_not_worse(self):
        self.assertLessEqual(self.loss("dilated-d2", "central-64"),
                             self.loss("zero", "central-64") + 0.005)


class TestBoundaryCount(unittest.TestCase):
    """Adding boundaries does not destroy position information"""

    @classmethod
    def setUpClass(cls):
        cls.report = run_n_ablation(desk_config(seeds=3))

    def test_more_boundaries_not_worse(self):
        baseline = self.report.find("wholepatch-N=0")["loss_mean"]
        for n in (1, 3, 5, 7):
            self.assertLessEqual(self.report.find(f"wholepatch-N={n}")["loss_mean"],
                                 baseline + 0.005, n)


class TestDepthOrdering(unittest.TestCase):
    """Circular padding never encodes more position than zero padding"""

    @classmethod
    def setUpClass(cls):
        cls.report = run_depth_ablation(desk_config(seeds=3))

    def test_circular_not_below_zero(self):
        for depth in (1, 2, 4, 8):
            zero = self.report.find(f"zero-D{depth}")["loss_mean"]
            circular = self.report.find(f"circular-D{depth}")["loss_mean"]
            self.assertGreaterEqual(circular, zero - 0.01, depth)


class TestDeterminism(unittest.TestCase):

    def test_resolution_grid_repeatable(self):
        cfg = desk_config(seed=7)
        self.assertEqual(run_resolution_grid(cfg).to_csv(), run_resolution_grid(cfg).to_csv())


if __name__ == '__main__':
    unittest.main()
