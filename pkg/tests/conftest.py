import pytest

from fanobench.codec import ChannelCondition, CodeSpec
from fanobench.fano import FanoConfig
from fanobench.montecarlo import run_campaign

# One seed for the big measurement fixtures so every test session sees the
# same histograms; individual tests that need fresh randomness pick their own.
CAMPAIGN_SEED = 20260823
CAMPAIGN_FRAMES = 100_000


@pytest.fixture(scope="session")
def spec():
    return CodeSpec.default()


@pytest.fixture(scope="session")
def campaigns(spec):
    """The four full-size decoding-time distributions (decoder x Eb/N0).

    Takes ~20 s total; session-scoped so the acceptance tests and the
    model tests share one measurement run.
    """
    out = {}
    for kind in ("ufa", "bfa"):
        for db in (4.0, 5.0):
            cond = ChannelCondition.from_ebn0(db, spec)
            config = FanoConfig.for_channel(cond, spec)
            out[(kind, db)] = run_campaign(
                kind, spec, cond, config, CAMPAIGN_FRAMES, seed=CAMPAIGN_SEED
            )
    return out


@pytest.fixture(scope="session")
def small_bfa4(spec):
    """A quick 2,000-frame bfa distribution for model-level unit tests."""
    cond = ChannelCondition.from_ebn0(4.0, spec)
    config = FanoConfig.for_channel(cond, spec)
    return run_campaign("bfa", spec, cond, config, 2000, seed=123)


@pytest.fixture(scope="session")
def small_ufa4(spec):
    cond = ChannelCondition.from_ebn0(4.0, spec)
    config = FanoConfig.for_channel(cond, spec)
    return run_campaign("ufa", spec, cond, config, 2000, seed=123)
