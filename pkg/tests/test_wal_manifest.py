"""WAL torn-tail screening and manifest commit/fallback semantics."""
import os

import pytest

from prefixkv.errors import UnrecoverableError
from prefixkv.lsm import manifest as mf
from prefixkv.lsm.records import IndexEntry
from prefixkv.lsm.wal import WalWriter, encode_record, replay


def _batch(tag, n=3):
    return [
        (bytes([tag]) * 8 * (i + 1), IndexEntry(i, i * 10, 5, 0, 99))
        for i in range(n)
    ]


def test_wal_append_replay(tmp_path):
    path = str(tmp_path / "wal.log")
    w = WalWriter(path)
    batches = [_batch(1), _batch(2, 1), _batch(3, 5)]
    for b in batches:
        w.append_batch(b)
    w.close()
    assert list(replay(path)) == batches


def test_wal_torn_tail_truncated_at_every_byte(tmp_path):
    batches = [_batch(1), _batch(2)]
    intact = b"".join(encode_record(b) for b in batches)
    last = encode_record(_batch(3))
    for cut in range(1, len(last)):
        path = str(tmp_path / f"wal-{cut}.log")
        with open(path, "wb") as f:
            f.write(intact + last[:cut])
        assert list(replay(path)) == batches
        # The torn bytes were removed so a reopened writer appends cleanly.
        assert os.path.getsize(path) == len(intact)
        w = WalWriter(path)
        w.append_batch(_batch(4))
        w.close()
        assert list(replay(path)) == batches + [_batch(4)]


def test_wal_corrupt_middle_record_stops_replay(tmp_path):
    recs = [encode_record(_batch(i)) for i in range(3)]
    blob = bytearray(b"".join(recs))
    blob[len(recs[0]) + 12] ^= 0xFF  # flip a payload byte of record 1
    path = str(tmp_path / "wal.log")
    with open(path, "wb") as f:
        f.write(bytes(blob))
    assert list(replay(path)) == [_batch(0)]


def _shape():
    return mf.LsmShape(4, 1, 1 << 20, 10)


def _manifest():
    m = mf.Manifest(_shape(), _shape(), next_run_id=3, wal_gen=2)
    m.levels = [[mf.RunMeta(1, 10, 999, b"a" * 8, b"z" * 8)]]
    return m


def test_manifest_commit_load_round_trip(tmp_path):
    d = str(tmp_path)
    m = _manifest()
    mf.commit(d, m)
    loaded = mf.load(d)
    assert loaded.to_json() == m.to_json()


def test_manifest_keeps_previous_version(tmp_path):
    d = str(tmp_path)
    m1 = _manifest()
    mf.commit(d, m1)
    m2 = m1.clone()
    m2.next_run_id = 9
    mf.commit(d, m2)
    assert os.path.exists(os.path.join(d, mf.PREVIOUS))
    # Corrupt the current version: load falls back to the previous one.
    with open(os.path.join(d, mf.CURRENT), "r+b") as f:
        f.seek(20)
        f.write(b"\x00\x00\x00\x00")
    loaded = mf.load(d)
    assert loaded.next_run_id == m1.next_run_id


def test_manifest_both_versions_corrupt(tmp_path):
    d = str(tmp_path)
    mf.commit(d, _manifest())
    m2 = _manifest()
    m2.wal_gen = 5
    mf.commit(d, m2)
    for name in (mf.CURRENT, mf.PREVIOUS):
        with open(os.path.join(d, name), "r+b") as f:
            f.seek(10)
            f.write(b"\xff" * 8)
    with pytest.raises(UnrecoverableError):
        mf.load(d)


def test_manifest_fresh_directory(tmp_path):
    assert mf.load(str(tmp_path)) is None


def test_shape_validation():
    with pytest.raises(Exception):
        mf.LsmShape(1, 1, 100, 10).validate()
    with pytest.raises(Exception):
        mf.LsmShape(4, 4, 100, 10).validate()  # K must be <= T-1
    mf.LsmShape(4, 3, 100, 10).validate()
    assert _shape().level_capacity(0) == 4 << 20
    assert _shape().level_capacity(2) == 64 << 20
