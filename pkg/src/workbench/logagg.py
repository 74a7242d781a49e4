"""Tenant-scoped log collection, storage, and query.

Collectors tail each instance's log volume and push complete lines here.
Every stored entry is tagged with the instance's (project, user) at
registration time; there is no code path that stores an untagged entry.
Lines that do not match the ``ISO8601 LEVEL message`` grammar are kept
verbatim as INFO entries stamped with arrival time, never dropped.

Storage is an in-memory per-project index backed by append-only segmented
JSONL files; queries serve from the index and survive instance teardown
because entries are keyed by project, not by instance lifetime.
"""

from __future__ import annotations

import datetime as _dt
import json
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import Forbidden, NoSuchProject, UnknownInstance
from .tenancy import Action, Decision, Role, Tenancy

LEVELS = ("DEBUG", "INFO", "WARN", "ERROR")

_LINE_RE = re.compile(r"^(\S+)\s+(DEBUG|INFO|WARN|ERROR)\s+(.*)$")

DEFAULT_SEGMENT_MAX_ENTRIES = 5000


def parse_iso8601(value: str) -> float | None:
    try:
        return _dt.datetime.fromisoformat(value.replace("Z", "+00:00")).timestamp()
    except ValueError:
        return None


def format_iso8601(ts: float) -> str:
    return (
        _dt.datetime.fromtimestamp(ts, _dt.timezone.utc)
        .strftime("%Y-%m-%dT%H:%M:%S.%fZ")
    )


@dataclass(frozen=True)
class LogEntry:
    timestamp: float
    project: str
    user: str
    instance: str
    level: str
    message: str

    def to_dict(self) -> dict:
        return {
            "timestamp": format_iso8601(self.timestamp),
            "project": self.project,
            "user": self.user,
            "instance": self.instance,
            "level": self.level,
            "message": self.message,
        }


class _ProjectStore:
    def __init__(self, directory: Path | None, segment_max_entries: int):
        self.lock = threading.Lock()
        self.entries: list[LogEntry] = []
        self.directory = directory
        self.segment_max_entries = segment_max_entries
        self._segment_index = 0
        self._segment_count = 0
        self._segment_fh = None

    def append(self, entry: LogEntry) -> None:
        with self.lock:
            self.entries.append(entry)
            if self.directory is not None:
                if self._segment_fh is None or self._segment_count >= self.segment_max_entries:
                    if self._segment_fh is not None:
                        self._segment_fh.close()
                    self._segment_index += 1
                    self.directory.mkdir(parents=True, exist_ok=True)
                    path = self.directory / f"segment-{self._segment_index:06d}.jsonl"
                    self._segment_fh = path.open("a", encoding="utf-8")
                    self._segment_count = 0
                self._segment_fh.write(json.dumps(entry.to_dict()) + "\n")
                self._segment_fh.flush()
                self._segment_count += 1

    def snapshot(self) -> list[LogEntry]:
        with self.lock:
            return list(self.entries)

    def prune_older_than(self, cutoff: float) -> None:
        with self.lock:
            self.entries = [e for e in self.entries if e.timestamp >= cutoff]


class LogAggregator:
    def __init__(
        self,
        tenancy: Tenancy,
        store_dir: str | Path | None = None,
        segment_max_entries: int = DEFAULT_SEGMENT_MAX_ENTRIES,
        retention_max_age: float | None = None,
    ):
        self._tenancy = tenancy
        self._store_dir = Path(store_dir) if store_dir is not None else None
        self._segment_max_entries = segment_max_entries
        self.retention_max_age = retention_max_age
        self._lock = threading.Lock()
        self._instances: dict[str, tuple[str, str]] = {}
        self._stores: dict[str, _ProjectStore] = {}

    def register_instance(self, instance: str, project: str, user: str) -> None:
        with self._lock:
            self._instances[instance] = (project, user)

    def instance_owner(self, instance: str) -> tuple[str, str] | None:
        with self._lock:
            return self._instances.get(instance)

    def _store_for(self, project: str) -> _ProjectStore:
        with self._lock:
            store = self._stores.get(project)
            if store is None:
                directory = self._store_dir / project if self._store_dir else None
                store = _ProjectStore(directory, self._segment_max_entries)
                self._stores[project] = store
            return store

    def collect(self, instance: str, lines: Iterable[str]) -> int:
        """Parse, tag, and append lines in arrival order; returns the count."""
        owner = self.instance_owner(instance)
        if owner is None:
            raise UnknownInstance(f"instance {instance!r} is not registered for collection")
        project, user = owner
        store = self._store_for(project)
        count = 0
        for raw in lines:
            line = raw.rstrip("\n")
            if not line:
                continue
            match = _LINE_RE.match(line)
            if match:
                ts = parse_iso8601(match.group(1))
                if ts is not None:
                    entry = LogEntry(ts, project, user, instance, match.group(2), match.group(3))
                else:
                    entry = LogEntry(time.time(), project, user, instance, "INFO", line)
            else:
                entry = LogEntry(time.time(), project, user, instance, "INFO", line)
            store.append(entry)
            count += 1
        if self.retention_max_age is not None:
            store.prune_older_than(time.time() - self.retention_max_age)
        return count

    def query(
        self,
        project: str,
        actor: str,
        user: str | None = None,
        from_ts: float | None = None,
        to_ts: float | None = None,
        limit: int | None = None,
    ) -> list[LogEntry]:
        """Entries matching all filters, in timestamp order, project-scoped.

        DataOwners may query any user in the project; DataScientists only
        their own entries (an explicit own-user filter is required).
        """
        if not self._tenancy.project_exists(project):
            raise NoSuchProject(f"no project {project!r}")
        if self._tenancy.authorize(actor, project, Action.QUERY_LOGS) is not Decision.ALLOW:
            raise Forbidden(f"{actor!r} may not query logs of {project!r}")
        if self._tenancy.role_of(project, actor) is Role.DATA_SCIENTIST and user != actor:
            raise Forbidden("DataScientists may only query their own logs")
        entries = self._store_for(project).snapshot()
        result = [
            e
            for e in entries
            if (user is None or e.user == user)
            and (from_ts is None or e.timestamp >= from_ts)
            and (to_ts is None or e.timestamp <= to_ts)
        ]
        result.sort(key=lambda e: e.timestamp)  # stable: arrival order on ties
        if limit is not None:
            result = result[:limit]
        return result


class FileTailer:
    """Polls a log volume for complete appended lines (filebeat-style)."""

    def __init__(self, path: str | Path, instance: str, aggregator: LogAggregator, interval: float = 0.05):
        self.path = Path(path)
        self.instance = instance
        self.aggregator = aggregator
        self.interval = interval
        self._offset = 0
        self._buffer = ""
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None

    def _poll_once(self) -> None:
        if not self.path.exists():
            return
        size = self.path.stat().st_size
        if size < self._offset:
            self._offset = 0  # volume truncated, start over
        if size == self._offset:
            return
        with self.path.open("r", encoding="utf-8", errors="replace") as fh:
            fh.seek(self._offset)
            chunk = fh.read()
            self._offset = fh.tell()
        self._buffer += chunk
        *complete, self._buffer = self._buffer.split("\n")
        if complete:
            self.aggregator.collect(self.instance, complete)

    def _run(self) -> None:
        while not self._stop.is_set():
            self._poll_once()
            self._stop.wait(self.interval)

    def start(self) -> None:
        self._thread = threading.Thread(target=self._run, daemon=True)
        self._thread.start()

    def drain(self) -> None:
        """Pick up everything written so far, including a final partial line."""
        self._poll_once()
        if self._buffer.strip():
            self.aggregator.collect(self.instance, [self._buffer])
            self._buffer = ""

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout=5)
            self._thread = None
        self.drain()
