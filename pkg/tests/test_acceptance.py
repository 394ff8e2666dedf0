"""Trend checks over a reduced sweep grid."""

import numpy as np
import pytest

from hqcoherence.analysis import t2_star
from hqcoherence.averaging import MonteCarlo, average_return_probability
from hqcoherence.materials import GALLIUM_ARSENIDE, SILICON, SILICON_28
from hqcoherence.sweep import SweepResult, SweepSpec, derive_point_params, run_sweep

pytestmark = pytest.mark.slow

J0_GRID = (1e-7, 1e-6, 1e-5)


@pytest.fixture(scope="module")
def result() -> SweepResult:
    return run_sweep(
        SweepSpec(
            j0_grid=J0_GRID,
            materials=(SILICON_28, SILICON, GALLIUM_ARSENIDE),
            sigma_ratios=(0.003, 0.03),
            method=MonteCarlo(n_samples=4000),
            master_seed=2024,
        )
    )


def _curve(result: SweepResult, material: str, ratio: float, attribute: str) -> list:
    return [getattr(row, attribute) for row in result.select(material, ratio)]


def test_every_point_fits(result: SweepResult) -> None:
    assert len(result) == 18
    for row in result:
        assert not any(d.startswith("failed") for d in row.diagnostics)
        assert np.isfinite(row.t2_star) and row.t2_star > 0
        assert not row.window_capped
        assert 0 < row.q < 1


@pytest.mark.parametrize("material", ["28Si", "Si", "GaAs"])
def test_weaker_charge_noise_lives_longer(result: SweepResult, material: str) -> None:
    weak = _curve(result, material, 0.003, "t2_star")
    strong = _curve(result, material, 0.03, "t2_star")
    for w, s in zip(weak, strong):
        assert w >= 0.9 * s


def test_coherence_shrinks_with_exchange(result: SweepResult) -> None:
    for material in ("28Si", "Si"):
        t2 = _curve(result, material, 0.03, "t2_star")
        assert t2[0] > t2[1] > t2[2]


def test_materials_converge_at_large_exchange(result: SweepResult) -> None:
    t2 = {
        material: _curve(result, material, 0.03, "t2_star")[-1]
        for material in ("28Si", "Si", "GaAs")
    }
    q = {
        material: _curve(result, material, 0.03, "q")[-1]
        for material in ("28Si", "Si", "GaAs")
    }
    assert t2["Si"] == pytest.approx(t2["28Si"], rel=0.15)
    assert t2["GaAs"] == pytest.approx(t2["28Si"], rel=0.15)
    assert q["Si"] == pytest.approx(q["28Si"], rel=0.1)
    assert q["GaAs"] == pytest.approx(q["28Si"], rel=0.1)


def test_isotopically_pure_quality_is_flat(result: SweepResult) -> None:
    for ratio in (0.003, 0.03):
        q = np.array(_curve(result, "28Si", ratio, "q"))
        assert np.ptp(q) <= 0.1 * q.mean()
    weak = _curve(result, "28Si", 0.003, "q")
    strong = _curve(result, "28Si", 0.03, "q")
    assert min(weak) > max(strong)


def test_magnetic_noise_degrades_quality(result: SweepResult) -> None:
    for ratio in (0.003, 0.03):
        gaas = _curve(result, "GaAs", ratio, "q")
        pure = _curve(result, "28Si", ratio, "q")
        assert gaas[0] < pure[0]


LOW_J0_GRID = (5e-9, 3e-8, 1e-7, 3e-7, 1e-5)
PLATEAU = slice(1, 4)


@pytest.fixture(scope="module")
def low_exchange() -> SweepResult:
    return run_sweep(
        SweepSpec(
            j0_grid=LOW_J0_GRID,
            materials=(SILICON, GALLIUM_ARSENIDE),
            sigma_ratios=(0.003, 0.03),
            method=MonteCarlo(n_samples=20_000),
            master_seed=77,
        )
    )


class TestLowExchange:
    """Magnetically dominated side of the grid, Si and GaAs only."""

    def test_every_point_fits(self, low_exchange: SweepResult) -> None:
        assert len(low_exchange) == 20
        for row in low_exchange:
            assert not any(d.startswith("failed") for d in row.diagnostics)
            assert np.isfinite(row.t2_star) and row.t2_star > 0

    @pytest.mark.parametrize("material", ["Si", "GaAs"])
    def test_weaker_charge_noise_lives_longer(
        self, low_exchange: SweepResult, material: str
    ) -> None:
        weak = _curve(low_exchange, material, 0.003, "t2_star")
        strong = _curve(low_exchange, material, 0.03, "t2_star")
        for w, s in zip(weak, strong):
            assert w >= 0.9 * s

    @pytest.mark.parametrize(
        "material",
        [
            "Si",
            pytest.param(
                "GaAs",
                marks=pytest.mark.xfail(
                    reason=(
                        "With the gradient acting only between |1> and the "
                        "quadruplet, a gradient much larger than j0 detunes |0> "
                        "instead of dephasing it; the slow residual decay is "
                        "set by charge noise."
                    )
                ),
            ),
        ],
    )
    def test_charge_noise_irrelevant_at_small_exchange(
        self, low_exchange: SweepResult, material: str
    ) -> None:
        weak = _curve(low_exchange, material, 0.003, "t2_star")[0]
        strong = _curve(low_exchange, material, 0.03, "t2_star")[0]
        assert weak == pytest.approx(strong, rel=0.15)

    def test_natural_silicon_plateau(self, low_exchange: SweepResult) -> None:
        t2 = _curve(low_exchange, "Si", 0.003, "t2_star")[PLATEAU]
        assert max(t2) / min(t2) <= 1.5

    def test_natural_silicon_saturates_first(self, low_exchange: SweepResult) -> None:
        for ratio in (0.003, 0.03):
            q = _curve(low_exchange, "Si", ratio, "q")
            assert q[3] == pytest.approx(q[-1], rel=0.05)
        gaas = _curve(low_exchange, "GaAs", 0.03, "q")
        assert gaas[3] < 0.95 * gaas[-1]

    @pytest.mark.xfail(
        reason=(
            "At j0 far below the gradient the fitted envelope follows the "
            "charge-noise tail, so GaAs Q falls with j0 there."
        )
    )
    def test_gallium_arsenide_quality_rises(self, low_exchange: SweepResult) -> None:
        for ratio in (0.003, 0.03):
            q = _curve(low_exchange, "GaAs", ratio, "q")
            assert q[0] < q[1] < q[2]


class TestReferencePoint:
    """Si at `j0` = 0.1 µeV with weak charge noise."""

    @pytest.fixture(scope="class")
    def params(self):
        return derive_point_params(1e-7, 0.003, SILICON)

    def test_stable_across_seeds(self, params) -> None:
        base, spec = params
        times = np.linspace(0, 4000, 4001)
        fits = [
            t2_star(
                average_return_probability(
                    base, spec, times, MonteCarlo(n_samples=20_000, seed=seed)
                )
            )
            for seed in (1, 2)
        ]
        assert fits[0].t2_star == pytest.approx(fits[1].t2_star, rel=0.05)
        assert not fits[0].t2_star_unbounded

    def test_grid_refinement(self, params) -> None:
        base, spec = params
        method = MonteCarlo(n_samples=20_000, seed=3)
        coarse, fine = (
            t2_star(
                average_return_probability(
                    base, spec, np.linspace(0, 4000, n), method
                )
            )
            for n in (4001, 8001)
        )
        assert coarse.t2_star == pytest.approx(fine.t2_star, rel=0.01)
