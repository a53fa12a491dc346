import math

import pytest
from scipy import stats

from gpuburst.market import (
    ConfigError,
    DelaySpec,
    GeoGroup,
    GpuModel,
    InstanceType,
    PreemptionRate,
    Provider,
    RegionMarket,
    sample_preemption_delay,
    spot_price,
)
from gpuburst.rng import RngStream

T4 = GpuModel("T4", 8.1, 2560)


def make_type(price=3.0, fraction=1.0 / 3.0, provider=Provider.AWS):
    return InstanceType("t", provider, T4, price, fraction)


def make_region(caps):
    return RegionMarket("r", Provider.AWS, GeoGroup.EUROPE, caps)


def test_spot_price_third():
    assert spot_price(make_type(3.0, 1.0 / 3.0)) == pytest.approx(1.0)


def test_spot_fraction_one_is_on_demand():
    assert spot_price(make_type(2.5, 1.0)) == 2.5


def test_onprem_is_free():
    it = InstanceType("op", Provider.ONPREM, T4, 0.0, 1.0)
    assert spot_price(it) == 0.0


def test_onprem_with_price_rejected():
    with pytest.raises(ConfigError):
        InstanceType("op", Provider.ONPREM, T4, 1.0, 1.0)


def test_spot_price_monotone():
    prices = [spot_price(make_type(p, 0.4)) for p in (1.0, 2.0, 3.0)]
    assert prices == sorted(prices)
    fractions = [spot_price(make_type(3.0, f)) for f in (0.2, 0.5, 1.0)]
    assert fractions == sorted(fractions)


def test_bad_spot_fraction_rejected():
    for bad in (0.0, -0.1, 1.5):
        with pytest.raises(ConfigError):
            make_type(1.0, bad)


class TestPreemptionDelay:
    def test_rate_zero_never(self):
        rng = RngStream(1, "p")
        assert sample_preemption_delay(0.0, rng) == math.inf

    def test_inverse_cdf_point(self):
        # u = e^-1 gives delay = -ln(u)/rate = 1/rate = 5 h

        class Fixed:
            def exponential(self, rate):
                return -math.log(math.exp(-1.0)) / rate

        assert sample_preemption_delay(0.2, Fixed()) == pytest.approx(5.0)

    def test_negative_rate_rejected(self):
        with pytest.raises(ConfigError):
            sample_preemption_delay(-0.1, RngStream(1, "p"))

    def test_mean_matches_analytic(self):
        rng = RngStream(5, "preempt/mean")
        n = 100_000
        mean = sum(sample_preemption_delay(0.5, rng) for _ in range(n)) / n
        assert mean == pytest.approx(2.0, rel=0.02)

    def test_ks_against_exponential(self):
        rng = RngStream(6, "preempt/ks")
        rate = 0.7
        samples = [sample_preemption_delay(rate, rng) for _ in range(10_000)]
        res = stats.kstest(samples, "expon", args=(0, 1.0 / rate))
        assert res.pvalue > 0.01


class TestPreemptionRateSteps:
    def test_constant_lookup(self):
        r = PreemptionRate.constant(0.3)
        assert r.at(0) == 0.3
        assert r.at(1e6) == 0.3

    def test_step_lookup(self):
        r = PreemptionRate([(0.0, 0.1), (3600.0, 0.5)])
        assert r.at(0) == 0.1
        assert r.at(3599.9) == 0.1
        assert r.at(3600.0) == 0.5

    def test_time_to_preemption_crosses_step(self):
        # 0.0/h for the first hour, then 1.0/h: tau=0.5 is consumed 30 min
        # into the second hour
        r = PreemptionRate([(0.0, 0.0), (3600.0, 1.0)])
        assert r.time_to_preemption(0.0, 0.5) == pytest.approx(3600.0 + 1800.0)

    def test_time_to_preemption_zero_tail_never(self):
        r = PreemptionRate([(0.0, 1.0), (3600.0, 0.0)])
        assert r.time_to_preemption(0.0, 2.0) == math.inf

    def test_constant_matches_direct_division(self):
        r = PreemptionRate.constant(0.25)
        assert r.time_to_preemption(500.0, 1.0) == pytest.approx(3600.0 / 0.25)


class TestCapacity:
    def test_grant_within_cap(self):
        region = make_region({"t": 100})
        assert region.grant_capacity(make_type(), 40) == 40

    def test_grant_clipped_by_in_use(self):
        region = make_region({"t": 100})
        it = make_type()
        region.grant_capacity(it, 90)
        assert region.grant_capacity(it, 40) == 10

    def test_grant_zero_at_plateau(self):
        region = make_region({"t": 100})
        it = make_type()
        region.grant_capacity(it, 100)
        assert region.grant_capacity(it, 1) == 0

    def test_release_returns_headroom(self):
        region = make_region({"t": 10})
        it = make_type()
        region.grant_capacity(it, 10)
        region.release_capacity(it, 4)
        assert region.grant_capacity(it, 10) == 4

    def test_in_use_never_exceeds_cap(self):
        region = make_region({"t": 17})
        it = make_type()
        rng = RngStream(2, "cap")
        for _ in range(200):
            if rng.uniform() < 0.6:
                region.grant_capacity(it, int(rng.uniform() * 10))
            elif region.used_for(it):
                region.release_capacity(it, 1)
            assert 0 <= region.used_for(it) <= 17

    def test_over_release_rejected(self):
        region = make_region({"t": 5})
        with pytest.raises(ConfigError):
            region.release_capacity(make_type(), 1)


def test_delay_spec_sigma_zero_is_median():
    rng = RngStream(1, "d")
    assert DelaySpec(120.0, 0.0).sample(rng) == 120.0


def test_delay_spec_median():
    rng = RngStream(1, "d")
    spec = DelaySpec(120.0, 0.5)
    samples = sorted(spec.sample(rng) for _ in range(20_000))
    median = samples[len(samples) // 2]
    assert median == pytest.approx(120.0, rel=0.03)
