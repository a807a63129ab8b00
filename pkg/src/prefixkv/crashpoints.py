"""Kill-point injection for crash-consistency tests.

Durability-sensitive code paths call ``hit(name)`` at each phase boundary.
In production nothing is armed and the call is a dict lookup on an empty
dict. Tests arm a point with a countdown; when it fires, ``InjectedCrash``
propagates out of the engine and the test reopens the directory to exercise
recovery.
"""
from __future__ import annotations

_armed: dict[str, int] = {}


class InjectedCrash(BaseException):
    """Raised at an armed kill point. Derives from BaseException so normal
    error handling in the engine never swallows it."""

    def __init__(self, point: str):
        super().__init__(point)
        self.point = point


def arm(name: str, countdown: int = 1) -> None:
    """Crash at the ``countdown``-th future hit of ``name``."""
    if countdown < 1:
        raise ValueError("countdown must be >= 1")
    _armed[name] = countdown


def disarm_all() -> None:
    _armed.clear()


def hit(name: str) -> None:
    if not _armed:
        return
    left = _armed.get(name)
    if left is None:
        return
    if left <= 1:
        del _armed[name]
        raise InjectedCrash(name)
    _armed[name] = left - 1


# Registry of every kill point, for test matrices.
ALL_POINTS = (
    "put.before_log_append",
    "tlog.mid_batch",
    "put.after_log_append",
    "wal.after_append",
    "put.after_index_put",
    "flush.after_run_write",
    "flush.after_manifest",
    "compact.after_run_write",
    "compact.after_manifest",
    "merge.after_new_files",
    "merge.after_index_update",
    "manifest.after_tmp_write",
    "manifest.after_prev_copy",
)
