import numpy as np
import pytest

from fanobench.codec import ChannelCondition, CodeSpec, encode, pack_branch_symbols
from fanobench.errors import InsufficientTailError, SchemaError
from fanobench.fano import FanoConfig
from fanobench.montecarlo import (
    BLOCK_FRAMES,
    TsDistribution,
    _encode_block,
    fit_pareto,
    load_distribution,
    merge_distributions,
    run_campaign,
    save_distribution,
)

from oracles import pareto_counts


def _dist(counts, kind="ufa", frame_length=206, t_min=206, fe=0, cap=0):
    return TsDistribution(
        counts=counts,
        samples=sum(counts.values()),
        condition=ChannelCondition.noiseless(),
        decoder_kind=kind,
        frame_errors=fe,
        cap_hits=cap,
        frame_length=frame_length,
        t_min=t_min,
    )


def test_distribution_validation():
    with pytest.raises(ValueError):
        _dist({100: 5})          # below the decoder floor
    with pytest.raises(ValueError):
        _dist({206: 0})          # empty bucket
    with pytest.raises(ValueError):
        TsDistribution(counts={206: 5}, samples=6,
                       condition=ChannelCondition.noiseless(), decoder_kind="ufa",
                       frame_errors=0, cap_hits=0, frame_length=206, t_min=206)
    with pytest.raises(ValueError):
        _dist({206: 5}, kind="xfa")
    with pytest.raises(ValueError):
        _dist({206: 5}, fe=6)


def test_pmf_and_ccdf():
    d = _dist({206: 6, 300: 3, 1000: 1})
    assert d.pmf[206] == 0.6
    assert sum(d.pmf.values()) == pytest.approx(1.0)
    ts, ccdf = d.ccdf()
    assert ts.tolist() == [206, 300, 1000]
    assert ccdf.tolist() == [0.4, 0.1, 0.0]
    assert d.mean_cycles() == pytest.approx((206 * 6 + 300 * 3 + 1000) / 10)


def test_merge_counts_and_guards():
    a = _dist({206: 2, 300: 1}, fe=1)
    b = _dist({206: 1, 400: 1}, cap=1)
    m = merge_distributions(a, b)
    assert m.counts == {206: 3, 300: 1, 400: 1}
    assert m.samples == 5 and m.frame_errors == 1 and m.cap_hits == 1
    with pytest.raises(ValueError):
        merge_distributions(a, _dist({103: 1}, kind="bfa", t_min=103))
    cond4 = ChannelCondition.from_ebn0(4.0, CodeSpec.default())
    other = TsDistribution(counts={206: 1}, samples=1, condition=cond4,
                           decoder_kind="ufa", frame_errors=0, cap_hits=0,
                           frame_length=206, t_min=206)
    with pytest.raises(ValueError):
        merge_distributions(a, other)


def test_campaign_argument_checks(spec):
    cond = ChannelCondition.noiseless()
    cfg = FanoConfig.for_channel(cond, spec)
    with pytest.raises(ValueError):
        run_campaign("vfa", spec, cond, cfg, 10, seed=0)
    with pytest.raises(ValueError):
        run_campaign("ufa", spec, cond, cfg, 0, seed=0)


def test_block_encoder_matches_public_encode(spec):
    rng = np.random.default_rng(6)
    info = rng.integers(0, 2, size=(40, spec.info_length), dtype=np.uint8)
    batch = _encode_block(info, spec)
    for i in range(info.shape[0]):
        ref = pack_branch_symbols(encode(info[i], spec), spec)
        assert np.array_equal(batch[i], ref)


def test_sharding_reproduces_single_run(spec):
    """Shard boundaries, including ones inside a block, must not change counts."""
    cond = ChannelCondition.from_ebn0(4.0, spec)
    cfg = FanoConfig.for_channel(cond, spec)
    full = run_campaign("ufa", spec, cond, cfg, 300, seed=77)
    for cut in (1, 137, 299):
        a = run_campaign("ufa", spec, cond, cfg, cut, seed=77)
        b = run_campaign("ufa", spec, cond, cfg, 300 - cut, seed=77, frame_offset=cut)
        m = merge_distributions(a, b)
        assert m.counts == full.counts
        assert m.frame_errors == full.frame_errors
        assert m.cap_hits == full.cap_hits


def test_sharding_across_block_boundary(spec):
    cond = ChannelCondition.from_ebn0(4.0, spec)
    cfg = FanoConfig.for_channel(cond, spec)
    lo = BLOCK_FRAMES - 20
    full = run_campaign("bfa", spec, cond, cfg, 40, seed=5, frame_offset=lo)
    a = run_campaign("bfa", spec, cond, cfg, 20, seed=5, frame_offset=lo)
    b = run_campaign("bfa", spec, cond, cfg, 20, seed=5, frame_offset=BLOCK_FRAMES)
    assert merge_distributions(a, b).counts == full.counts


def test_noiseless_campaign_is_point_mass(spec):
    cond = ChannelCondition.noiseless()
    cfg = FanoConfig.for_channel(cond, spec)
    d = run_campaign("bfa", spec, cond, cfg, 50, seed=1)
    assert d.counts == {103: 50}
    assert d.frame_errors == 0 and d.cap_hits == 0


def test_cap_hits_counted(spec):
    cond = ChannelCondition.from_ebn0(4.0, spec)
    cfg = FanoConfig.for_channel(cond, spec, max_cycles=250)
    d = run_campaign("ufa", spec, cond, cfg, 400, seed=3)
    assert d.cap_hits > 0
    assert d.counts.get(250, 0) >= d.cap_hits
    assert max(d.counts) == 250


def test_small_campaign_error_rate_sane(small_ufa4):
    assert 0.03 < small_ufa4.frame_error_rate < 0.2
    assert small_ufa4.samples == 2000
    assert min(small_ufa4.counts) >= 206


def test_fit_recovers_synthetic_exponent():
    counts = pareto_counts(beta=1.5, t_min=206, n_draws=1_000_000, seed=8)
    d = _dist(counts)
    fit = fit_pareto(d)
    assert fit.exponent == pytest.approx(1.5, abs=0.05)
    assert fit.residual < 0.05
    assert fit.fit_window[0] == 412


def test_fit_scale_consistency():
    """Refitting the fit's own closed-form CCDF reproduces the exponent."""
    counts = pareto_counts(beta=2.0, t_min=206, n_draws=500_000, seed=9)
    first = fit_pareto(_dist(counts))
    # synthesize counts whose CCDF is exactly the fitted model
    ts = np.unique(np.round(np.logspace(np.log10(206), np.log10(50_000), 400)).astype(int))
    ccdf = np.minimum(first.ccdf_model(ts, 206), 1.0)
    pmf = np.concatenate([-np.diff(ccdf), [ccdf[-1]]])
    n = 10_000_000
    synth = {int(t): int(round(p * n)) for t, p in zip(ts, pmf) if round(p * n) > 0}
    again = fit_pareto(_dist(synth))
    assert again.exponent == pytest.approx(first.exponent, rel=0.01)


def test_fit_rejects_point_mass():
    with pytest.raises(InsufficientTailError):
        fit_pareto(_dist({206: 10_000}))


def test_fit_rejects_thin_tail():
    with pytest.raises(InsufficientTailError):
        fit_pareto(_dist({206: 10_000, 500: 50}))


def test_save_load_round_trip(tmp_path, small_bfa4):
    path = tmp_path / "ts.csv"
    save_distribution(small_bfa4, path, extra={"note": "round trip"})
    back = load_distribution(path)
    assert back.counts == small_bfa4.counts
    assert back.samples == small_bfa4.samples
    assert back.condition == small_bfa4.condition
    assert back.decoder_kind == small_bfa4.decoder_kind
    assert back.frame_errors == small_bfa4.frame_errors
    assert back.t_min == small_bfa4.t_min


def test_load_rejects_missing_sidecar(tmp_path):
    p = tmp_path / "ts.csv"
    p.write_text("cycles,count\n206,1\n")
    with pytest.raises(SchemaError):
        load_distribution(p)


def test_load_rejects_wrong_schema(tmp_path, small_bfa4):
    path = tmp_path / "ts.csv"
    save_distribution(small_bfa4, path)
    side = path.with_suffix(".json")
    side.write_text(side.read_text().replace("ts-dist/1", "other/9"))
    with pytest.raises(SchemaError):
        load_distribution(path)


def test_load_rejects_wrong_header(tmp_path, small_bfa4):
    path = tmp_path / "ts.csv"
    save_distribution(small_bfa4, path)
    rows = path.read_text().splitlines()
    rows[0] = "time,weight"
    path.write_text("\n".join(rows) + "\n")
    with pytest.raises(SchemaError):
        load_distribution(path)
