"""Bit-exact on-disk formats against checked-in golden fixtures.

Regenerating these fixtures is a format break: readers of existing
directories must still understand the old bytes.
"""
import os


from prefixkv.lsm.records import IndexEntry
from prefixkv.lsm.runfile import FOOTER_SIZE, RunReader, write_run
from prefixkv.lsm.wal import encode_record as wal_record
from prefixkv.tensor_log import encode_record as log_record

GOLDEN = os.path.join(os.path.dirname(__file__), "golden")


def _read(name):
    with open(os.path.join(GOLDEN, name), "rb") as f:
        return f.read()


def test_wal_record_layout():
    pairs = [
        (bytes.fromhex("00112233445566778899aabbccddeeff"),
         IndexEntry(7, 1024, 333, 1, 0xDEADBEEF)),
        (bytes.fromhex("cafebabe01234567"),
         IndexEntry(2, 0, 21, 0, 0x12345678)),
    ]
    assert wal_record(pairs) == _read("wal_record.bin")


def test_log_record_layout():
    rec = log_record(
        bytes.fromhex("0102030405060708f1f2f3f4f5f6f7f8"),
        b"payload-bytes-0123", codec_id=1, raw_len=26,
    )
    assert rec == _read("log_record.bin")


def _golden_run_pairs():
    return [
        (bytes([i]) * 8, IndexEntry(i, i * 100, 10 + i, i % 2, i * 1000003))
        for i in range(1, 5)
    ]


def test_run_file_and_footer_layout(tmp_path):
    path = str(tmp_path / "run.sst")
    write_run(path, _golden_run_pairs(), bits_per_key=10)
    blob = open(path, "rb").read()
    assert blob == _read("run_file.bin")
    assert blob[-FOOTER_SIZE:] == _read("run_footer.bin")


def test_golden_run_parses_back(tmp_path):
    path = str(tmp_path / "run.sst")
    with open(path, "wb") as f:
        f.write(_read("run_file.bin"))
    r = RunReader(path, run_id=0)
    assert r.entry_count == 4
    for key, entry in _golden_run_pairs():
        assert r.get(key) == entry
    r.close()
