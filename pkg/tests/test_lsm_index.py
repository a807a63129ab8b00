"""LSM index: oracle equivalence, structural invariants, lazy shape
transitions, recovery."""
import os

import numpy as np
import pytest

from prefixkv.errors import UsageError
from prefixkv.lsm import IndexEntry, LsmIndex, LsmShape
from prefixkv.lsm.records import ENTRY_SIZE


def small_shape(T=4, K=1, M=4096, bloom=10):
    return LsmShape(T, K, M, bloom)


def _entry(i):
    return IndexEntry(i % 11, i * 37, 1 + i % 5, 0, (i * 2654435761) % 2**32)


def _key(rng, max_blocks=4):
    depth = int(rng.integers(1, max_blocks + 1))
    return rng.integers(0, 256, size=8 * depth, dtype=np.uint8).tobytes()


@pytest.fixture
def index(tmp_path):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape())
    yield idx
    idx.close()


def test_read_your_write(index):
    key = b"k" * 8
    index.put_batch([(key, _entry(1))])
    assert index.get(key) == _entry(1)


def test_empty_batch_no_wal_growth(index):
    before = index.stats.wal_bytes
    index.put_batch([])
    assert index.stats.wal_bytes == before


def test_absent_key_empty_tree_no_block_reads(index):
    assert index.get(b"q" * 8) is None
    assert index.stats.data_block_reads == 0


def test_flush_triggered_by_buffer_fill(tmp_path):
    M = 4096
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape(M=M))
    key_len = 16
    per_pair = key_len + ENTRY_SIZE + 2
    n = M // per_pair + 1
    pairs = [
        (i.to_bytes(8, "big") + b"\x00" * 8, _entry(i)) for i in range(n)
    ]
    idx.put_batch(pairs)
    assert idx.stats.flushes == 1
    assert idx.level_run_counts()[0] == 1
    for k, e in pairs[::50]:
        assert idx.get(k) == e
    idx.close()


def test_overwrite_newest_wins(tmp_path):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape())
    key = b"dup" + b"\x00" * 5
    idx.put_batch([(key, _entry(1))])
    idx.flush()
    idx.put_batch([(key, _entry(2))])
    assert idx.get(key) == _entry(2)
    idx.flush()
    idx.maybe_compact()
    assert idx.get(key) == _entry(2)
    assert [k for k, _ in idx.range_scan(key, key + b"\x01")] == [key]
    idx.close()


def test_range_scan_empty(index):
    assert list(index.range_scan(b"a" * 8, b"b" * 8)) == []
    with pytest.raises(UsageError):
        list(index.range_scan(b"b" * 8, b"a" * 8))


def test_oracle_equivalence_randomized(tmp_path, rng):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape(M=2048))
    oracle: dict[bytes, IndexEntry] = {}
    keys_pool = [_key(rng) for _ in range(400)]
    for step in range(3000):
        op = rng.integers(0, 100)
        if op < 55:
            batch = []
            for _ in range(int(rng.integers(1, 6))):
                k = keys_pool[int(rng.integers(len(keys_pool)))]
                e = _entry(int(rng.integers(1 << 30)))
                batch.append((k, e))
            idx.put_batch(batch)
            for k, e in batch:
                oracle[k] = e
        elif op < 85:
            k = keys_pool[int(rng.integers(len(keys_pool)))]
            assert idx.get(k) == oracle.get(k), f"step {step}"
        elif op < 93:
            a, b = sorted(
                (_key(rng, 2) + b"\x00" * 6)[:16] for _ in range(2)
            )
            if a == b:
                continue
            got = list(idx.range_scan(a, b))
            want = sorted(
                (k, v) for k, v in oracle.items() if a <= k < b
            )
            assert got == want, f"step {step}"
        elif op < 97:
            idx.flush()
        else:
            idx.maybe_compact()
    # Full scan equals the oracle map.
    full = list(idx.range_scan(b"\x00", b"\xff" * 40))
    assert full == sorted(oracle.items())
    idx.close()


def test_full_scan_after_compaction_fixpoint(tmp_path, rng):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape(T=3, K=2, M=2048))
    oracle = {}
    for i in range(1500):
        k = _key(rng)
        e = _entry(i)
        idx.put_batch([(k, e)])
        oracle[k] = e
    while not idx.maybe_compact().is_noop():
        pass
    shape = idx.shape
    counts = idx.level_run_counts()
    sizes = idx.level_bytes()
    assert all(c <= shape.K for c in counts)
    for lvl, total in enumerate(sizes):
        assert total <= shape.level_capacity(lvl) or lvl == len(sizes) - 1
    assert list(idx.range_scan(b"\x00", b"\xff" * 40)) == sorted(oracle.items())
    idx.close()


def test_level_count_bound(tmp_path, rng):
    import math

    M = 2048
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape(T=4, M=M))
    for i in range(2000):
        idx.put_batch([(_key(rng), _entry(i))])
    while not idx.maybe_compact().is_noop():
        pass
    n = idx.entry_count()
    e = idx.avg_entry_bytes()
    nonempty = sum(1 for c in idx.level_run_counts() if c)
    bound = math.ceil(math.log(max(2.0, n * e / M), 4)) + 1
    assert nonempty <= bound
    idx.close()


def test_set_target_shape_no_immediate_io(tmp_path, rng):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape(T=4, K=1))
    for i in range(300):
        idx.put_batch([(_key(rng), _entry(i))])
    idx.flush()
    before = idx.stats.bytes_rewritten
    idx.set_target_shape(small_shape(T=8, K=1))
    assert idx.stats.bytes_rewritten == before
    assert idx.shape.T == 8
    idx.close()


def test_set_target_shape_equal_noop(tmp_path):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape())
    manifest_path = os.path.join(idx.directory, "MANIFEST")
    mtime = os.path.getmtime(manifest_path)
    idx.set_target_shape(small_shape())
    assert os.path.getmtime(manifest_path) == mtime
    idx.close()


def test_set_target_shape_rejects_invalid(tmp_path):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape())
    with pytest.raises(UsageError):
        idx.set_target_shape(LsmShape(4, 4, 4096, 10))
    idx.close()


def test_k_decrease_converges_to_single_runs(tmp_path, rng):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape(T=5, K=4, M=2048))
    for i in range(1200):
        idx.put_batch([(_key(rng), _entry(i))])
    idx.flush()
    idx.set_target_shape(small_shape(T=5, K=1, M=2048))
    for _ in range(20):
        if idx.maybe_compact().is_noop():
            break
    assert all(c <= 1 for c in idx.level_run_counts())
    assert idx.current_shape.K == 1
    idx.close()


def test_k_decrease_consolidates_within_level(tmp_path, rng):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape(T=5, K=3, M=2048))
    for i in range(900):
        idx.put_batch([(_key(rng), _entry(i))])
    idx.flush()
    while not idx.maybe_compact().is_noop():
        pass
    counts_before = idx.level_run_counts()
    deepest = max(i for i, c in enumerate(counts_before) if c)
    idx.set_target_shape(small_shape(T=5, K=1, M=2048))
    report = idx.maybe_compact()
    # Consolidation keeps data at its level rather than pushing deeper.
    counts_after = idx.level_run_counts()
    deepest_after = max(i for i, c in enumerate(counts_after) if c)
    assert deepest_after == deepest
    if any(c > 1 for c in counts_before):
        assert report.consolidations > 0
    idx.close()


def test_k_increase_allows_move_without_merge(tmp_path, rng):
    # Level 1 holds one run; an oversized run must descend from level 0.
    # Under K=1 that forces a merge; after raising K to 2 the run file
    # moves down untouched.
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape(T=3, K=1, M=2048))
    batch_a = sorted((_key(rng, 2), _entry(i)) for i in range(180))
    idx.put_batch(batch_a)  # > M, flushes; run exceeds level-0 capacity
    report = idx.maybe_compact()
    assert report.run_moves == 1  # trivial move into the empty level 1
    assert idx.level_run_counts() == [0, 1]

    batch_b = sorted((_key(rng, 2), _entry(i)) for i in range(180, 360))
    idx.put_batch(batch_b)
    assert idx.level_run_counts()[0] == 1
    idx.set_target_shape(small_shape(T=3, K=2, M=2048))
    rewritten_before = idx.stats.bytes_rewritten
    report = idx.maybe_compact()
    assert report.run_moves == 1
    assert report.bytes_rewritten == 0
    assert idx.stats.bytes_rewritten == rewritten_before
    assert idx.level_run_counts()[1] == 2  # runs stay separate
    assert idx.current_shape.K == 2
    idx.close()


def test_recover_empty_dir(tmp_path):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape())
    assert idx.entry_count() == 0
    assert idx.get(b"x" * 8) is None
    idx.close()


def test_recover_replays_wal_and_preserves_runs(tmp_path, rng):
    d = str(tmp_path / "idx")
    idx = LsmIndex.open(d, small_shape(M=4096))
    pairs = [(_key(rng), _entry(i)) for i in range(50)]
    idx.put_batch(pairs[:30])
    idx.flush()
    idx.put_batch(pairs[30:])  # stays in WAL + memtable
    idx.close()
    idx2 = LsmIndex.open(d)
    for k, e in pairs:
        latest = [v for kk, v in pairs if kk == k][-1]
        assert idx2.get(k) == latest
    idx2.close()


def test_recover_deletes_orphan_files(tmp_path, rng):
    d = str(tmp_path / "idx")
    idx = LsmIndex.open(d, small_shape())
    idx.put_batch([(_key(rng), _entry(1))])
    idx.flush()
    idx.close()
    orphan_run = os.path.join(d, "run-00f00f00.sst")
    orphan_wal = os.path.join(d, "wal-00000099.log")
    orphan_tmp = os.path.join(d, "run-00000044.sst.tmp")
    for p in (orphan_run, orphan_wal, orphan_tmp):
        with open(p, "wb") as f:
            f.write(b"junk")
    idx2 = LsmIndex.open(d)
    assert not os.path.exists(orphan_run)
    assert not os.path.exists(orphan_wal)
    assert not os.path.exists(orphan_tmp)
    idx2.close()


def test_bloom_probe_counters(tmp_path, rng):
    idx = LsmIndex.open(str(tmp_path / "idx"), small_shape(M=2048))
    pairs = [(_key(rng), _entry(i)) for i in range(300)]
    idx.put_batch(pairs)
    idx.flush()
    idx.stats.bloom_probes = 0
    idx.stats.data_block_reads = 0
    for _ in range(200):
        idx.get(_key(rng))
    assert idx.stats.bloom_probes > 0
    # Bloom filters keep most absent lookups off disk.
    assert idx.stats.data_block_reads < idx.stats.bloom_probes * 0.5
    idx.close()
