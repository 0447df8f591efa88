"""Web-enabled versioned storage for sources and derived snapshots.

On-disk layout under the data directory (selected by PORTAL_DATA_DIR):

    blobs/<sha256>   content-addressed blob files, written once
    log              append-only commit log, 4-byte big-endian length-prefixed
                     JSON records
    index            JSON cache of the in-memory state; rebuilt from the log
                     on startup when missing or stale

Commits are atomic and serialized through a single writer lock; readers work
on immutable snapshots and always observe a fully committed revision.  A torn
tail record in the log (crash mid-append) is discarded on reopen; every fully
appended commit survives.
"""

from __future__ import annotations

import difflib
import hashlib
import json
import os
import struct
import threading
import time
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence


class StoreError(Exception):
    code = "StoreError"


class EmptyCommit(StoreError):
    code = "EmptyCommit"


class InvalidPath(StoreError):
    code = "InvalidPath"


class NotFound(StoreError):
    code = "NotFound"


class NoSuchRevision(StoreError):
    code = "NoSuchRevision"


@dataclass(frozen=True)
class CommitRecord:
    revision: int
    timestamp: int  # UTC seconds
    author: str
    message: str
    changed_paths: tuple[str, ...]


@dataclass(frozen=True)
class Hunk:
    """One line-level edit: replace/delete/insert with 1-based line starts."""

    op: str
    old_start: int
    old_lines: tuple[str, ...]
    new_start: int
    new_lines: tuple[str, ...]


@dataclass(frozen=True)
class _Snapshot:
    head: int
    # path -> ordered ((revision, blob hash | None for deletion), ...)
    histories: dict[str, tuple[tuple[int, str | None], ...]]
    records: tuple[CommitRecord, ...]


_PATH_SEGMENT = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789._-")
_LEN = struct.Struct(">I")


def validate_path(path: str) -> None:
    if not path or path.startswith("/") or path.endswith("/"):
        raise InvalidPath(f"invalid path {path!r}")
    for segment in path.split("/"):
        if not segment or segment == ".." or segment == ".":
            raise InvalidPath(f"invalid path {path!r}")
        if not set(segment) <= _PATH_SEGMENT:
            raise InvalidPath(f"invalid path {path!r}")


class Store:
    """Single-repository linear-history store (no branches)."""

    def __init__(self, data_dir: str | Path):
        self.data_dir = Path(data_dir)
        self.blob_dir = self.data_dir / "blobs"
        self.log_path = self.data_dir / "log"
        self.index_path = self.data_dir / "index"
        self.blob_dir.mkdir(parents=True, exist_ok=True)
        self._write_lock = threading.Lock()
        self._snapshot = self._open()

    # -- startup / recovery -------------------------------------------------

    def _open(self) -> _Snapshot:
        log_size = self.log_path.stat().st_size if self.log_path.exists() else 0
        snapshot = self._load_index(log_size)
        if snapshot is None:
            snapshot, valid_size = self._scan_log()
            if valid_size != log_size:
                # discard a torn tail record from a crashed append
                with open(self.log_path, "r+b") as fh:
                    fh.truncate(valid_size)
            self._write_index(snapshot, valid_size)
        return snapshot

    def _load_index(self, log_size: int) -> _Snapshot | None:
        try:
            obj = json.loads(self.index_path.read_text(encoding="utf-8"))
        except (OSError, ValueError):
            return None
        if obj.get("log_size") != log_size:
            return None  # stale: the log grew (or shrank) since the index write
        try:
            records = tuple(
                CommitRecord(
                    revision=r["revision"],
                    timestamp=r["timestamp"],
                    author=r["author"],
                    message=r["message"],
                    changed_paths=tuple(r["changed_paths"]),
                )
                for r in obj["records"]
            )
            histories = {
                path: tuple((entry[0], entry[1]) for entry in entries)
                for path, entries in obj["histories"].items()
            }
            return _Snapshot(head=obj["head"], histories=histories, records=records)
        except (KeyError, TypeError):
            return None

    def _scan_log(self) -> tuple[_Snapshot, int]:
        histories: dict[str, list[tuple[int, str | None]]] = {}
        records: list[CommitRecord] = []
        head = 0
        valid = 0
        if self.log_path.exists():
            data = self.log_path.read_bytes()
            pos = 0
            while pos + _LEN.size <= len(data):
                (length,) = _LEN.unpack_from(data, pos)
                if pos + _LEN.size + length > len(data):
                    break  # torn tail
                payload = data[pos + _LEN.size : pos + _LEN.size + length]
                try:
                    obj = json.loads(payload.decode("utf-8"))
                except (ValueError, UnicodeDecodeError):
                    break
                if obj.get("revision") != head + 1:
                    break
                head += 1
                changed = []
                for change in obj["changes"]:
                    path = change["path"]
                    blob = None if change.get("delete") else change["blob"]
                    histories.setdefault(path, []).append((head, blob))
                    changed.append(path)
                records.append(
                    CommitRecord(
                        revision=head,
                        timestamp=obj["timestamp"],
                        author=obj["author"],
                        message=obj["message"],
                        changed_paths=tuple(changed),
                    )
                )
                pos += _LEN.size + length
                valid = pos
        snapshot = _Snapshot(
            head=head,
            histories={p: tuple(v) for p, v in histories.items()},
            records=tuple(records),
        )
        return snapshot, valid

    def _write_index(self, snapshot: _Snapshot, log_size: int) -> None:
        obj = {
            "head": snapshot.head,
            "log_size": log_size,
            "histories": {p: [list(e) for e in v] for p, v in snapshot.histories.items()},
            "records": [
                {
                    "revision": r.revision,
                    "timestamp": r.timestamp,
                    "author": r.author,
                    "message": r.message,
                    "changed_paths": list(r.changed_paths),
                }
                for r in snapshot.records
            ],
        }
        tmp = self.index_path.with_suffix(".tmp")
        tmp.write_text(json.dumps(obj, separators=(",", ":")), encoding="utf-8")
        os.replace(tmp, self.index_path)

    # -- public API ----------------------------------------------------------

    def head(self) -> int:
        return self._snapshot.head

    def commit(
        self,
        changes: Sequence[tuple[str, bytes | None]],
        author: str,
        message: str = "",
    ) -> int:
        """Apply `changes` atomically; `None` content is a deletion marker.

        Returns the new revision number.  All changes become visible at that
        revision together; prior revisions are immutable forever.
        """
        if not changes:
            raise EmptyCommit("a commit needs at least one change")
        for path, _ in changes:
            validate_path(path)
        with self._write_lock:
            snapshot = self._snapshot
            revision = snapshot.head + 1
            last_ts = snapshot.records[-1].timestamp if snapshot.records else 0
            timestamp = max(int(time.time()), last_ts)
            entries = []
            for path, content in changes:
                if content is None:
                    entries.append({"path": path, "delete": True})
                else:
                    entries.append({"path": path, "blob": self._put_blob(content)})
            record = {
                "revision": revision,
                "timestamp": timestamp,
                "author": author,
                "message": message,
                "changes": entries,
            }
            payload = json.dumps(record, separators=(",", ":"), ensure_ascii=False).encode()
            with open(self.log_path, "ab") as fh:
                fh.write(_LEN.pack(len(payload)) + payload)
                fh.flush()
                os.fsync(fh.fileno())
                log_size = fh.tell()
            histories = dict(snapshot.histories)
            changed_paths = []
            for entry in entries:
                path = entry["path"]
                blob = None if entry.get("delete") else entry["blob"]
                histories[path] = histories.get(path, ()) + ((revision, blob),)
                changed_paths.append(path)
            new_snapshot = _Snapshot(
                head=revision,
                histories=histories,
                records=snapshot.records
                + (
                    CommitRecord(
                        revision=revision,
                        timestamp=timestamp,
                        author=author,
                        message=message,
                        changed_paths=tuple(changed_paths),
                    ),
                ),
            )
            self._snapshot = new_snapshot
            self._write_index(new_snapshot, log_size)
            return revision

    def _put_blob(self, content: bytes) -> str:
        digest = hashlib.sha256(content).hexdigest()
        target = self.blob_dir / digest
        if not target.exists():
            tmp = target.with_suffix(".tmp")
            tmp.write_bytes(content)
            os.replace(tmp, target)
        return digest

    def _entry_at(self, snapshot: _Snapshot, path: str, at: int) -> tuple[int, str | None]:
        history = snapshot.histories.get(path)
        if history is None:
            raise NotFound(f"{path!r} does not exist")
        index = bisect_right(history, at, key=lambda entry: entry[0]) - 1
        if index < 0:
            raise NotFound(f"{path!r} does not exist at revision {at}")
        return history[index]

    def get(self, path: str, at: int | None = None) -> bytes:
        """Content of `path` as of revision `at` (default: head)."""
        snapshot = self._snapshot
        if at is None:
            at = snapshot.head
        if not 1 <= at <= snapshot.head:
            raise NoSuchRevision(f"revision {at} does not exist (head is {snapshot.head})")
        _, blob = self._entry_at(snapshot, path, at)
        if blob is None:
            raise NotFound(f"{path!r} is deleted at revision {at}")
        return (self.blob_dir / blob).read_bytes()

    def exists(self, path: str, at: int | None = None) -> bool:
        try:
            self.get(path, at)
            return True
        except (NotFound, NoSuchRevision):
            return False

    def list_paths(self, at: int | None = None) -> list[str]:
        """Paths that exist (not deleted) at the given revision, sorted."""
        snapshot = self._snapshot
        if at is None:
            at = snapshot.head
        if at == 0:
            return []
        if not 1 <= at <= snapshot.head:
            raise NoSuchRevision(f"revision {at} does not exist (head is {snapshot.head})")
        out = []
        for path, history in snapshot.histories.items():
            index = bisect_right(history, at, key=lambda entry: entry[0]) - 1
            if index >= 0 and history[index][1] is not None:
                out.append(path)
        return sorted(out)

    def history(self, path: str) -> list[CommitRecord]:
        """Commit records touching `path`, ascending; empty when never committed."""
        snapshot = self._snapshot
        return [r for r in snapshot.records if path in r.changed_paths]

    def diff(self, path: str, r1: int, r2: int) -> list[Hunk]:
        """Line-based edit script turning content@r1 into content@r2."""
        old = self.get(path, r1).decode("utf-8").splitlines(keepends=True)
        new = self.get(path, r2).decode("utf-8").splitlines(keepends=True)
        matcher = difflib.SequenceMatcher(a=old, b=new, autojunk=False)
        hunks = []
        for op, i1, i2, j1, j2 in matcher.get_opcodes():
            if op == "equal":
                continue
            hunks.append(
                Hunk(
                    op=op,
                    old_start=i1 + 1,
                    old_lines=tuple(old[i1:i2]),
                    new_start=j1 + 1,
                    new_lines=tuple(new[j1:j2]),
                )
            )
        return hunks


def apply_hunks(old_text: str, hunks: Iterable[Hunk]) -> str:
    """Apply a diff() edit script; the patch-application inverse of diff."""
    old = old_text.splitlines(keepends=True)
    out: list[str] = []
    cursor = 0  # 0-based index into old
    for hunk in sorted(hunks, key=lambda h: h.old_start):
        start = hunk.old_start - 1
        out.extend(old[cursor:start])
        out.extend(hunk.new_lines)
        cursor = start + len(hunk.old_lines)
    out.extend(old[cursor:])
    return "".join(out)
