"""Append-only JSON-lines run logs.

Every line carries a `schema` tag (verify@1, fact@1, recomposed@1). Reads
keep the last line per logical key so that a run interrupted mid-question
heals itself on resume. A lock file makes each log single-writer.
"""

from __future__ import annotations

import json
import os
import threading
from pathlib import Path

VERIFY_SCHEMA = "verify@1"
FACT_SCHEMA = "fact@1"
RECOMPOSED_SCHEMA = "recomposed@1"


class RunLogLockedError(RuntimeError):
    """Another live process holds the lock for this run log."""


class RunLogWriter:
    """Serialized appender with an exclusive lock file next to the log."""

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._lock_path = Path(str(self.path) + ".lock")
        self._acquire()
        self._mutex = threading.Lock()
        self._fh = open(self.path, "a", encoding="utf-8")

    def _acquire(self) -> None:
        while True:
            try:
                fd = os.open(self._lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            except FileExistsError:
                try:
                    pid = int(self._lock_path.read_text().strip() or "0")
                except (OSError, ValueError):
                    pid = 0
                if pid and _process_alive(pid):
                    raise RunLogLockedError(
                        f"{self.path} is locked by running process {pid}"
                    ) from None
                # Stale lock from a dead process; reclaim it.
                try:
                    self._lock_path.unlink()
                except FileNotFoundError:
                    pass
                continue
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            return

    def append(self, record: dict) -> None:
        line = json.dumps(record, ensure_ascii=False)
        with self._mutex:
            self._fh.write(line + "\n")
            self._fh.flush()

    def close(self) -> None:
        with self._mutex:
            if not self._fh.closed:
                self._fh.close()
        try:
            self._lock_path.unlink()
        except FileNotFoundError:
            pass

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _process_alive(pid: int) -> bool:
    try:
        os.kill(pid, 0)
    except ProcessLookupError:
        return False
    except PermissionError:
        return True
    return True


def _record_key(record: dict) -> tuple:
    schema = record.get("schema", "")
    if schema == FACT_SCHEMA:
        return (schema, record.get("retriever", ""), record["qid"], record.get("sidx", 0))
    if schema == RECOMPOSED_SCHEMA:
        return (schema, record.get("retriever", ""), record["qid"])
    return (schema, record.get("evidence_mode", ""), record["qid"])


def read_records(path) -> list[dict]:
    """All records, deduplicated: the last line per logical key wins (qid
    plus evidence mode for verify records; qid, statement index, and
    retriever for fact records). Logs from different modes or retrievers
    can therefore be concatenated for combined reports. Order follows each
    record's final occurrence."""
    path = Path(path)
    if not path.exists():
        return []
    keyed: dict[tuple, dict] = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            record = json.loads(line)
            key = _record_key(record)
            keyed.pop(key, None)
            keyed[key] = record
    return list(keyed.values())


def completed_qids(records: list[dict], kind: str, column: str = "") -> set[int]:
    """qids already finished in a log: verify records of the given evidence
    mode, or recomposed records of the given retriever. An empty `column`
    matches any."""
    done = set()
    if kind == "verify":
        target, field = VERIFY_SCHEMA, "evidence_mode"
    else:
        target, field = RECOMPOSED_SCHEMA, "retriever"
    for record in records:
        if record.get("schema") != target:
            continue
        if column and record.get(field, "") not in ("", column):
            continue
        done.add(record["qid"])
    return done
