"""Kill-point crash consistency (quick matrix; the full 50-trial matrix
runs in the acceptance suite)."""
import numpy as np
import pytest

from crash_harness import run_trial
from prefixkv import Engine, EngineConfig, crashpoints
from prefixkv.crashpoints import ALL_POINTS, InjectedCrash


@pytest.mark.parametrize("point", ALL_POINTS)
def test_kill_point_quick(point, tmp_path):
    fired = 0
    for trial in range(4):
        result = run_trial(point, str(tmp_path / f"t{trial}"), seed=1000 + trial)
        fired += result.fired
    # Frequent-path points must actually fire under this workload; the
    # rarer maintenance points are exercised heavily in acceptance.
    if point.startswith(("put.", "wal.", "flush.", "manifest.", "tlog.")):
        assert fired > 0, f"{point} never fired in quick trials"


def test_crash_between_phases_leaves_no_dangling_entry(tmp_path, rng):
    d = str(tmp_path / "s")
    cfg = EngineConfig(block_tokens=4, memtable_bytes=4096,
                       controller_enabled=False)
    e = Engine(d, cfg)
    tokens = rng.integers(0, 2**32, size=16, dtype=np.uint32)
    tensors = [bytes([i]) * 100 for i in range(4)]
    crashpoints.arm("put.after_log_append")
    with pytest.raises(InjectedCrash):
        e.put_batch(tokens, tensors)
    crashpoints.disarm_all()
    del e
    e2 = Engine(d)
    # Phase 1 ran (payloads on disk), phase 2 did not (no index entries).
    assert e2.probe(tokens).matched_blocks == 0
    assert e2.index.entry_count() == 0
    assert e2.log.total_bytes() > 0  # orphan payloads await reclamation
    e2.close()


def test_orphans_from_phase1_crash_are_reclaimed(tmp_path, rng):
    d = str(tmp_path / "s")
    cfg = EngineConfig(block_tokens=4, memtable_bytes=4096, file_cap=2048,
                       max_tensor_files=2, controller_enabled=False)
    e = Engine(d, cfg)
    tokens = rng.integers(0, 2**32, size=16, dtype=np.uint32)
    crashpoints.arm("put.after_log_append")
    with pytest.raises(InjectedCrash):
        e.put_batch(tokens, [bytes([i]) * 900 for i in range(4)])
    crashpoints.disarm_all()
    del e
    e2 = Engine(d)
    # Live writes so merging has something to keep.
    live = rng.integers(0, 2**32, size=16, dtype=np.uint32)
    live_tensors = [bytes([9 + i]) * 900 for i in range(4)]
    e2.put_batch(live, live_tensors)
    reclaimed = 0
    for _ in range(10):
        report = e2.maintenance_tick()
        reclaimed += report.tensor_bytes_reclaimed
        if report.tensor_records_remapped == 0 and report.tensor_bytes_reclaimed == 0:
            break
    assert reclaimed > 0, "orphan bytes were never reclaimed"
    assert e2.get_batch(live, 4) == live_tensors
    assert e2.probe(tokens).matched_blocks == 0
    e2.close()


def test_recovery_is_idempotent(tmp_path, rng):
    d = str(tmp_path / "s")
    result = run_trial("flush.after_run_write", d, seed=7)
    # Recover twice more; state must remain stable and valid.
    for _ in range(2):
        e = Engine(d)
        before = e.index.entry_count()
        e.close()
        e = Engine(d)
        assert e.index.entry_count() == before
        e.close()
