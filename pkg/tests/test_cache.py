import numpy as np
import pytest

from deskdlm import (
    ConfigError,
    MacCounter,
    ModelConfig,
    StaleCacheError,
    cached_forward,
    init_model,
    model_forward,
    refresh_cache,
)

from conftest import raw_prompt


def test_refresh_point_equivalence(tiny_model):
    seq = raw_prompt(20, 12, seed=1)
    window = (20, 28)
    cache = refresh_cache(tiny_model, seq, window)
    cached = cached_forward(tiny_model, cache, seq)
    full = model_forward(tiny_model, seq, positions=np.arange(*window))
    np.testing.assert_allclose(cached.probs, full.probs, rtol=1e-5, atol=1e-8)


def test_cached_rows_normalized_after_unmask(tiny_model):
    # once a window token unmasks, cached and full logits may drift apart,
    # but every row must stay a distribution
    seq = raw_prompt(20, 12, seed=1)
    window = (20, 28)
    cache = refresh_cache(tiny_model, seq, window)
    seq.unmask([20], [65])
    cached = cached_forward(tiny_model, cache, seq)
    assert np.isfinite(cached.probs).all()
    np.testing.assert_allclose(cached.probs.sum(axis=1), 1.0, atol=1e-5)


def test_cached_differs_from_full_after_unmask(tiny_model):
    # the frozen out-of-window entries are not updated, so after an in-window
    # change the cached pass is an approximation of the full pass
    seq = raw_prompt(20, 12, seed=1)
    window = (20, 28)
    cache = refresh_cache(tiny_model, seq, window)
    seq.unmask(list(range(20, 26)), [65] * 6)
    cached = cached_forward(tiny_model, cache, seq)
    full = model_forward(tiny_model, seq, positions=cached.positions)
    assert np.abs(cached.probs - full.probs).max() > 0


def test_stale_on_cached_region_edit(tiny_model):
    seq = raw_prompt(20, 12, seed=1)
    cache = refresh_cache(tiny_model, seq, (20, 28))
    seq.tokens[5] = (seq.tokens[5] + 1) % 256  # mutate outside the window
    seq.mask_flags[5] = False
    with pytest.raises(StaleCacheError):
        cached_forward(tiny_model, cache, seq)


def test_stale_on_length_change(tiny_model):
    seq = raw_prompt(20, 12, seed=1)
    cache = refresh_cache(tiny_model, seq, (20, 28))
    grown = raw_prompt(24, 12, seed=1)
    with pytest.raises(StaleCacheError):
        cached_forward(tiny_model, cache, grown)


def test_window_out_of_bounds(tiny_model):
    seq = raw_prompt(10, 4)
    with pytest.raises(ConfigError):
        refresh_cache(tiny_model, seq, (10, 20))
    with pytest.raises(ConfigError):
        refresh_cache(tiny_model, seq, (6, 6))


def test_positions_must_be_in_window(tiny_model):
    seq = raw_prompt(20, 12, seed=1)
    cache = refresh_cache(tiny_model, seq, (20, 28))
    with pytest.raises(ConfigError):
        cached_forward(tiny_model, cache, seq, positions=[3])


def test_cache_covers_complement(tiny_model):
    seq = raw_prompt(20, 12, seed=1)
    window = (22, 30)
    cache = refresh_cache(tiny_model, seq, window)
    # out-of-window entries come from the full pass at refresh time
    from deskdlm.model import full_hidden

    _, kv = full_hidden(tiny_model, seq.tokens, collect_kv=True)
    for layer, (k, v) in enumerate(kv):
        np.testing.assert_array_equal(cache.k_bufs[layer][: window[0]], k[: window[0]])
        np.testing.assert_array_equal(cache.k_bufs[layer][window[1] :], k[window[1] :])
        np.testing.assert_array_equal(cache.v_bufs[layer][: window[0]], v[: window[0]])


def test_mac_ratio_tracks_window_over_length():
    # cached step cost should scale like B/len relative to a full pass
    model = init_model(ModelConfig(layers=2, hidden_dim=64, heads=4, seed=0))
    n, b = 512, 32
    seq = raw_prompt(n - 64, 64, seed=5)
    assert len(seq) == n
    window = (n - 64, n - 32)

    full_counter = MacCounter()
    model_forward(model, seq, positions=np.arange(*window), counter=full_counter)

    cache = refresh_cache(model, seq, window)
    step_counter = MacCounter()
    cached_forward(model, cache, seq, counter=step_counter)

    ratio = step_counter.macs / full_counter.macs
    expected = b / n
    assert abs(ratio - expected) / expected <= 0.20


def test_refresh_counts_as_full_pass(tiny_model):
    seq = raw_prompt(20, 12, seed=1)
    refresh_counter = MacCounter()
    refresh_cache(tiny_model, seq, (20, 28), counter=refresh_counter)
    full_counter = MacCounter()
    model_forward(tiny_model, seq, counter=full_counter)
    # refresh skips the vocabulary projection but pays the full transformer
    assert refresh_counter.macs > 0.5 * full_counter.macs


def test_stamps_increase(tiny_model):
    seq = raw_prompt(20, 12, seed=1)
    c1 = refresh_cache(tiny_model, seq, (20, 28))
    c2 = refresh_cache(tiny_model, seq, (20, 28))
    assert c2.stamp > c1.stamp
