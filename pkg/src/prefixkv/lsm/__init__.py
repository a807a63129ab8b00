from .index import IndexEntry, IndexStats, LsmIndex, LsmShape

__all__ = ["IndexEntry", "IndexStats", "LsmIndex", "LsmShape"]
