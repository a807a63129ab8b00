"""Cost model arithmetic, grid optimization, and retune behavior."""
import json
import math

import pytest

from prefixkv.controller import (
    Controller,
    CostModelParams,
    WorkloadProfile,
    level_count,
    op_costs,
    optimize,
    should_retune,
    total_cost,
)
from prefixkv.errors import UsageError
from prefixkv.stats import OpStats


def params(entries=100_000, entry_bytes=32.0, buffer_bytes=4096 * 4,
           block_entries=128.0, bloom_bits=10, scan_entries_avg=16.0):
    return CostModelParams(entries, entry_bytes, buffer_bytes,
                           block_entries, bloom_bits, scan_entries_avg)


def ratio_params(ratio, M=1 << 20):
    # N*e/M == ratio exactly
    return params(entries=ratio, entry_bytes=float(M), buffer_bytes=M)


WRITE_ONLY = WorkloadProfile(1, 0, 0, 0)
READ_ONLY = WorkloadProfile(0, 0, 1, 0)
UNIFORM = WorkloadProfile(0.25, 0.25, 0.25, 0.25)


def test_level_count_single_level():
    assert level_count(ratio_params(1), T=4) == 1


def test_level_count_ratio_256():
    assert level_count(ratio_params(256), T=4) == 4
    assert level_count(ratio_params(256), T=16) == 2


def test_level_count_matches_ceil_log():
    for ratio in (2, 3, 5, 17, 100, 255, 257, 4096):
        for T in (2, 3, 4, 7, 16):
            expect = max(1, math.ceil(math.log(ratio) / math.log(T) - 1e-12))
            assert level_count(ratio_params(ratio), T) == expect, (ratio, T)


def test_op_costs_frozen_values():
    # L=3 via ratio T^3, B=128: W = T*L/(B*K) = 10*3/(128*9)
    p = params(block_entries=128.0)
    ten_cubed = ratio_params(1000)
    w, s, r, z = op_costs(
        CostModelParams(1000, float(1 << 20), 1 << 20, 128.0, 10, 16.0), 10, 9
    )
    assert abs(w - 0.026041666666666668) < 1e-15
    # L=3, K=1, 10 bloom bits: Z = 3 * 0.6185^10
    w, s, r, z = op_costs(
        CostModelParams(8, float(1 << 20), 1 << 20, 128.0, 10, 16.0), 2, 1
    )
    assert abs(z - 0.024576401555190412) < 1e-15
    assert abs(r - (z + 1)) < 1e-15


def test_bloom_limit_zero():
    # Infinite bloom bits: absent probes free, present reads cost 1.
    pr = params(bloom_bits=400)
    _, _, r, z = op_costs(pr, 4, 1)
    assert z < 1e-30
    assert abs(r - 1.0) < 1e-12


def test_total_cost_substitutions():
    pr = params()
    w, s, r, z = op_costs(pr, 6, 2)
    assert total_cost(WRITE_ONLY, pr, 6, 2) == w
    assert total_cost(READ_ONLY, pr, 6, 2) == r
    assert abs(total_cost(UNIFORM, pr, 6, 2) - (w + s + r + z) / 4) < 1e-15


def test_total_cost_linear_in_profile(rng):
    pr = params()
    for _ in range(50):
        a = rng.dirichlet([1, 1, 1, 1])
        b = rng.dirichlet([1, 1, 1, 1])
        alpha = float(rng.uniform())
        mix = alpha * a + (1 - alpha) * b
        pa = WorkloadProfile(*a)
        pb = WorkloadProfile(*b)
        pm = WorkloadProfile(*(mix / mix.sum()))
        lhs = total_cost(pm, pr, 5, 2)
        rhs = alpha * total_cost(pa, pr, 5, 2) + (1 - alpha) * total_cost(pb, pr, 5, 2)
        assert abs(lhs - rhs) < 1e-9


def test_write_only_prefers_tiering_end():
    choice = optimize(WRITE_ONLY, params(), t_max=16)
    assert choice.K == choice.T - 1


def test_read_only_prefers_leveling():
    choice = optimize(READ_ONLY, params(), t_max=16)
    assert choice.K == 1


def test_optimize_equals_brute_force(rng):
    for _ in range(300):
        pr = params(
            entries=int(rng.integers(1, 10**7)),
            entry_bytes=float(rng.uniform(8, 2048)),
            buffer_bytes=int(rng.integers(4096, 1 << 22)),
            block_entries=float(rng.uniform(1, 512)),
            bloom_bits=int(rng.integers(1, 20)),
            scan_entries_avg=float(rng.uniform(0, 512)),
        )
        profile = WorkloadProfile(*rng.dirichlet([1, 1, 1, 1]))
        choice = optimize(profile, pr, t_max=16)
        # Independent brute force, written from the weighted-sum definition.
        best = None
        for T in range(2, 17):
            levels = 1
            cap = T
            ratio = pr.entries * pr.entry_bytes / pr.buffer_bytes
            while cap < ratio:
                cap *= T
                levels += 1
            p = 0.6185**pr.bloom_bits
            for K in range(1, T):
                cost = (
                    profile.write * (T * levels / (pr.block_entries * K))
                    + profile.range_scan * (K * levels + pr.scan_entries_avg / pr.block_entries)
                    + profile.point_read * (K * levels * p + 1)
                    + profile.zero_probe * (K * levels * p)
                )
                if best is None or cost < best[0]:
                    best = (cost, T, K)
        assert (choice.T, choice.K) == (best[1], best[2])
        assert abs(choice.predicted_cost - best[0]) <= 1e-12 * max(1.0, abs(best[0]))


def test_k_monotone_in_write_share():
    pr = params()
    last_k = None
    ks = []
    for i in range(21):
        w = i / 20
        profile = WorkloadProfile(w, 0.0, 1 - w, 0.0)
        ks.append(optimize(profile, pr).K)
    assert ks == sorted(ks)  # increasing w never decreases K
    rs = []
    for i in range(21):
        r = i / 20
        profile = WorkloadProfile(1 - r, 0.0, r, 0.0)
        rs.append(optimize(profile, pr).K)
    assert rs == sorted(rs, reverse=True)


def test_should_retune_threshold_semantics():
    a = WorkloadProfile(1, 0, 0, 0)
    b = WorkloadProfile(0, 0, 1, 0)
    assert not should_retune(a, a, 0.2)
    assert should_retune(a, b, 0.2)  # L1 = 2
    c = WorkloadProfile(0.9, 0, 0.1, 0)
    assert a.l1_distance(c) == pytest.approx(0.2)
    assert not should_retune(a, c, 0.2)  # exactly at threshold: strict


def test_profile_must_sum_to_one():
    with pytest.raises(UsageError):
        WorkloadProfile(0.5, 0.5, 0.5, 0.5)


def _window(writes=0, scans=0, reads=0, zeros=0):
    return OpStats(writes=writes, range_scans=scans, point_reads_ok=reads,
                   zero_probes=zeros)


def test_controller_tick_underfilled(tmp_path):
    c = Controller(str(tmp_path / "log.jsonl"), window_min=1000)
    assert c.tick(_window(writes=10), params()) is None


def test_controller_tick_retunes_then_stays(tmp_path):
    log = str(tmp_path / "log.jsonl")
    c = Controller(log, window_min=100)
    first = c.tick(_window(writes=2000), params())
    assert first is not None and first.K == first.T - 1
    # identical window: no second retune
    assert c.tick(_window(writes=2000), params()) is None
    # shift to read-heavy: retune to leveling
    second = c.tick(_window(reads=5000), params())
    assert second is not None and second.K == 1
    entries = [json.loads(l) for l in open(log)]
    assert len(entries) == 3
    assert [e["action"] for e in entries] == ["retune", "stable", "retune"]
    assert all(e.get("K", 1) < 17 for e in entries)


def test_controller_never_picks_k_ge_t(rng, tmp_path):
    c = Controller(None, window_min=1)
    for _ in range(100):
        counts = rng.integers(0, 1000, size=4)
        if counts.sum() == 0:
            continue
        c.last_retune_profile = None  # force retune each time
        choice = c.tick(
            _window(*[int(x) for x in counts]), params()
        )
        assert choice is None or choice.K < choice.T
