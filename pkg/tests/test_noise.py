import math

import numpy as np
import pytest
from scipy import integrate, stats

from hqcoherence.exceptions import DegenerateDistributionError, InvalidParametersError
from hqcoherence.noise import (
    NoiseSpec,
    pdf_delta_e,
    pdf_j,
    sample_noise,
    sample_truncated_normal,
    truncation_normalization,
)


def _seeded_draws() -> tuple[list[tuple[float, float]], list[float]]:
    rng = np.random.default_rng(20241)
    sigmas = 10.0 ** rng.uniform(-10, -5, size=20)
    ratios = np.concatenate([[0.0, 0.1, 1.0, 10.0], rng.uniform(0, 12, size=16)])
    truncated = [(float(r * s), float(s)) for r, s in zip(ratios, sigmas)]
    gradient = [float(s) for s in 10.0 ** rng.uniform(-10, -5, size=5)]
    return truncated, gradient


TRUNCATED_DRAWS, GRADIENT_DRAWS = _seeded_draws()


class TestNoiseSpec:
    @pytest.mark.parametrize("field", ["sigma_e", "j01", "sigma_j2"])
    def test_negative(self, field: str) -> None:
        with pytest.raises(InvalidParametersError, match=field):
            NoiseSpec(**{field: -1.0})

    def test_delta_e_std(self) -> None:
        assert NoiseSpec(sigma_e=3e-9).delta_e_std == pytest.approx(math.sqrt(2) * 3e-9)

    def test_deterministic(self) -> None:
        assert NoiseSpec(j01=1e-7, j02=3e-7).is_deterministic
        assert not NoiseSpec(sigma_j1=1e-9).is_deterministic


class TestPdfDeltaE:
    def test_peak(self) -> None:
        assert pdf_delta_e(0.0, 1.0) == pytest.approx(1 / (2 * math.sqrt(math.pi)))

    def test_symmetric(self) -> None:
        x = np.linspace(0, 5e-8, 11)
        np.testing.assert_array_equal(pdf_delta_e(x, 1e-8), pdf_delta_e(-x, 1e-8))

    @pytest.mark.parametrize("sigma_e", [3e-9, 1e-7, 1.0, *GRADIENT_DRAWS])
    def test_normalized(self, sigma_e: float) -> None:
        bound = 20 * sigma_e
        mass, _ = integrate.quad(
            pdf_delta_e, -bound, bound, args=(sigma_e,), epsabs=1e-13, epsrel=1e-13
        )
        assert mass == pytest.approx(1.0, abs=1e-10)

    def test_variance(self) -> None:
        sigma_e = 2.0
        second, _ = integrate.quad(
            lambda x: x**2 * pdf_delta_e(x, sigma_e), -60, 60, epsabs=1e-12
        )
        assert second == pytest.approx(2 * sigma_e**2, rel=1e-9)

    @pytest.mark.parametrize("sigma_e", [0.0, -1.0])
    def test_degenerate(self, sigma_e: float) -> None:
        with pytest.raises(DegenerateDistributionError):
            pdf_delta_e(0.0, sigma_e)


class TestPdfJ:
    def test_normalization_at_zero_mean(self) -> None:
        assert truncation_normalization(0.0, 1.0) == 2.0

    @pytest.mark.parametrize(("j0i", "sigma"), TRUNCATED_DRAWS)
    def test_normalized(self, j0i: float, sigma: float) -> None:
        mass, _ = integrate.quad(
            pdf_j,
            0.0,
            j0i + 12 * sigma,
            args=(j0i, sigma),
            points=[j0i] if j0i > 0 else None,
            epsabs=0.0,
            epsrel=1e-12,
            limit=200,
        )
        assert mass == pytest.approx(1.0, abs=1e-8)

    def test_scale_invariant(self) -> None:
        x = np.linspace(0, 4, 9)
        np.testing.assert_allclose(
            pdf_j(x * 1e-7, 1e-7, 3e-8) * 1e-7, pdf_j(x, 1.0, 0.3), rtol=1e-12
        )

    def test_far_from_zero(self) -> None:
        sigma = 1e-8
        assert pdf_j(20 * sigma, 20 * sigma, sigma) == pytest.approx(
            1 / (sigma * math.sqrt(2 * math.pi)), rel=1e-12
        )

    def test_negative_support(self) -> None:
        assert pdf_j(-1e-9, 1e-8, 1e-8) == 0.0

    def test_degenerate(self) -> None:
        with pytest.raises(DegenerateDistributionError):
            pdf_j(1.0, 1.0, 0.0)


class TestSampleTruncatedNormal:
    def test_zero_width(self, rng: np.random.Generator) -> None:
        np.testing.assert_array_equal(
            sample_truncated_normal(5e-7, 0.0, 10, rng), np.full(10, 5e-7)
        )

    @pytest.mark.parametrize(("mean", "sigma"), [(1.0, 0.3), (0.0, 1.0), (-4.0, 1.0)])
    def test_distribution(
        self, rng: np.random.Generator, mean: float, sigma: float
    ) -> None:
        samples = sample_truncated_normal(mean, sigma, 200_000, rng)
        assert samples.shape == (200_000,)
        assert np.all(samples >= 0)
        law = stats.truncnorm(-mean / sigma, np.inf, loc=mean, scale=sigma)
        assert samples.mean() == pytest.approx(
            law.mean(), abs=5 * law.std() / math.sqrt(samples.size)
        )
        assert stats.kstest(samples, law.cdf).pvalue > 1e-4


class TestSampleNoise:
    def test_deterministic_spec(self, rng: np.random.Generator) -> None:
        spec = NoiseSpec(j01=1e-7, j02=3e-7)
        assert sample_noise(spec, rng) == (0.0, 1e-7, 3e-7)
        delta_e, j1, j2 = sample_noise(spec, rng, 5)
        np.testing.assert_array_equal(delta_e, 0.0)
        np.testing.assert_array_equal(j1, 1e-7)
        np.testing.assert_array_equal(j2, 3e-7)

    def test_moments(self, rng: np.random.Generator) -> None:
        n = 1_000_000
        spec = NoiseSpec(
            sigma_e=1e-8, j01=1e-7, j02=3e-7, sigma_j1=3e-9, sigma_j2=9e-9
        )
        delta_e, j1, j2 = sample_noise(spec, rng, n)
        std = spec.delta_e_std
        assert abs(delta_e.mean()) < 5 * std / math.sqrt(n)
        assert delta_e.std() == pytest.approx(std, rel=5 / math.sqrt(n))
        assert j1.mean() == pytest.approx(1e-7, abs=5 * 3e-9 / math.sqrt(n))
        assert j2.std() == pytest.approx(9e-9, rel=5 / math.sqrt(n))
        assert np.all(j1 >= 0) and np.all(j2 >= 0)

    def test_reproducible(self) -> None:
        spec = NoiseSpec(sigma_e=1e-8, j01=1e-8, j02=3e-8, sigma_j1=1e-8, sigma_j2=3e-8)
        first = sample_noise(spec, np.random.default_rng(7), 1000)
        second = sample_noise(spec, np.random.default_rng(7), 1000)
        for a, b in zip(first, second):
            np.testing.assert_array_equal(a, b)
