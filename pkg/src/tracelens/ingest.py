"""Log ingestion: JSON usage logs -> per-user sessions -> time-cut traces -> count matrices."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError, LogParseError, VocabularyError

SECONDS_PER_DAY = 86400
TIMESTAMP_FORMAT = "%Y-%m-%d %H:%M:%S"

DEFAULT_START = "TermsAndConditions"
DEFAULT_STOP = "UseStop"


@dataclass(frozen=True)
class Vocabulary:
    names: tuple[str, ...]
    start_state: int = 0
    stop_state: int = 7

    def __post_init__(self) -> None:
        if len(set(self.names)) != len(self.names):
            dupes = sorted({n for n in self.names if self.names.count(n) > 1})
            raise VocabularyError(f"duplicate view names: {', '.join(dupes)}", dupes)
        n = len(self.names)
        for what, sid in (("start_state", self.start_state), ("stop_state", self.stop_state)):
            if not 0 <= sid < n:
                raise VocabularyError(f"{what} {sid} out of range for {n} views")
        if self.start_state == self.stop_state:
            raise VocabularyError("start_state and stop_state must differ")

    @property
    def size(self) -> int:
        return len(self.names)

    def __len__(self) -> int:
        return len(self.names)

    def entries(self) -> list[tuple[int, str]]:
        return list(enumerate(self.names))

    def index(self, name: str) -> int:
        try:
            return self._lookup[name]
        except KeyError:
            raise VocabularyError(f"unknown view name {name!r}", [name]) from None

    def name(self, state: int) -> str:
        return self.names[state]

    @property
    def _lookup(self) -> dict[str, int]:
        # frozen dataclass: cache through object.__setattr__
        try:
            return self.__dict__["_lookup_cache"]
        except KeyError:
            table = {name: i for i, name in enumerate(self.names)}
            object.__setattr__(self, "_lookup_cache", table)
            return table

    def to_text(self) -> str:
        return "".join(f"{i}\t{name}\n" for i, name in enumerate(self.names))


def parse_vocabulary(text: str, start: str = DEFAULT_START, stop: str = DEFAULT_STOP) -> Vocabulary:
    """Parse ``id<TAB>name`` lines. Ids must be contiguous from 0.

    ``start`` and ``stop`` name the session-start and session-stop views; a
    missing start name falls back to id 0.
    """
    pairs: list[tuple[int, str]] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t") if "\t" in line else line.split(None, 1)
        if len(parts) != 2:
            raise VocabularyError(f"vocabulary line {lineno}: expected 'id<TAB>name', got {raw!r}")
        try:
            sid = int(parts[0])
        except ValueError:
            raise VocabularyError(f"vocabulary line {lineno}: bad id {parts[0]!r}") from None
        pairs.append((sid, parts[1].strip()))
    pairs.sort()
    if [sid for sid, _ in pairs] != list(range(len(pairs))):
        raise VocabularyError("vocabulary ids must be contiguous from 0")
    names = tuple(name for _, name in pairs)
    if stop not in names:
        raise VocabularyError(f"stop view {stop!r} not in vocabulary", [stop])
    start_id = names.index(start) if start in names else 0
    return Vocabulary(names, start_id, names.index(stop))


def load_vocabulary(path: str | Path | None = None, start: str = DEFAULT_START,
                    stop: str = DEFAULT_STOP) -> Vocabulary:
    if path is None:
        return default_vocabulary()
    return parse_vocabulary(Path(path).read_text(encoding="utf-8"), start, stop)


def default_vocabulary() -> Vocabulary:
    """The 15 AppTracker views (ids 0-14)."""
    text = resources.files("tracelens").joinpath("data/apptracker.vocab").read_text(encoding="utf-8")
    return parse_vocabulary(text)


@dataclass(frozen=True)
class Session:
    events: tuple[tuple[int, int], ...]  # (timestamp, state_id)

    @property
    def start_time(self) -> int:
        return self.events[0][0]

    @property
    def states(self) -> list[int]:
        return [s for _, s in self.events]


@dataclass(frozen=True)
class UserRecord:
    device_id: str
    first_seen: int
    last_seen: int
    sessions: tuple[Session, ...] = ()


@dataclass(frozen=True)
class TimeCut:
    """Half-open day interval [d1, d2) counted from each user's first_seen."""

    d1: float
    d2: float

    def __post_init__(self) -> None:
        if self.d1 < 0 or not self.d1 < self.d2:
            raise InputError(f"invalid time cut [{self.d1},{self.d2})")

    @classmethod
    def parse(cls, text: str) -> "TimeCut":
        try:
            a, b = text.split(":")
            d1 = int(a)
            d2 = math.inf if b.strip().lower() in ("inf", "") else int(b)
        except ValueError:
            raise InputError(f"bad time cut {text!r}; expected 'd1:d2'") from None
        return cls(d1, d2)

    @property
    def tag(self) -> str:
        fmt = lambda d: "inf" if math.isinf(d) else str(int(d))
        return f"{fmt(self.d1)}_{fmt(self.d2)}"

    def __str__(self) -> str:
        fmt = lambda d: "inf" if math.isinf(d) else str(int(d))
        return f"[{fmt(self.d1)},{fmt(self.d2)})"


def parse_cuts(text: str) -> list[TimeCut]:
    return [TimeCut.parse(part.strip()) for part in text.split(",") if part.strip()]


@dataclass
class TraceSet:
    vocabulary: Vocabulary
    traces: list[tuple[str, list[int]]] = field(default_factory=list)
    start_symbol: int | None = None

    def __post_init__(self) -> None:
        if self.start_symbol is None:
            self.start_symbol = self.vocabulary.start_state
        n = self.vocabulary.size
        for device, seq in self.traces:
            if len(seq) < 2:
                raise InputError(f"trace for {device!r} has fewer than 2 states")
            if seq[0] != self.start_symbol:
                raise InputError(f"trace for {device!r} does not begin with the cut-start symbol")
            if min(seq) < 0 or max(seq) >= n:
                raise InputError(f"trace for {device!r} has state ids outside 0..{n - 1}")

    def __len__(self) -> int:
        return len(self.traces)

    @property
    def device_ids(self) -> list[str]:
        return [d for d, _ in self.traces]

    def count_tensor(self) -> np.ndarray:
        """(M, n, n) stack of transition-occurrence matrices."""
        n = self.vocabulary.size
        out = np.zeros((len(self.traces), n, n), dtype=np.int64)
        for m, (_, seq) in enumerate(self.traces):
            out[m] = count_matrix(seq, self.vocabulary)
        return out

    def to_json(self) -> str:
        doc = {
            "vocabulary": list(self.vocabulary.names),
            "start_state": self.vocabulary.start_state,
            "stop_state": self.vocabulary.stop_state,
            "start_symbol": self.start_symbol,
            "traces": [{"deviceid": d, "states": list(seq)} for d, seq in self.traces],
        }
        return json.dumps(doc, indent=None, separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "TraceSet":
        try:
            doc = json.loads(text)
            vocab = Vocabulary(tuple(doc["vocabulary"]), doc["start_state"], doc["stop_state"])
            traces = [(t["deviceid"], [int(s) for s in t["states"]]) for t in doc["traces"]]
            return cls(vocab, traces, doc["start_symbol"])
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise InputError(f"malformed trace file: {exc}") from None


def _parse_time(value: object, where: str) -> int:
    if not isinstance(value, str):
        raise LogParseError(f"{where}: timestamp must be a string")
    try:
        dt = datetime.strptime(value.strip(), TIMESTAMP_FORMAT)
    except ValueError:
        raise LogParseError(f"{where}: bad timestamp {value!r}") from None
    return int(dt.replace(tzinfo=timezone.utc).timestamp())


def format_time(ts: int) -> str:
    return datetime.fromtimestamp(ts, tz=timezone.utc).strftime(TIMESTAMP_FORMAT)


def parse_log(document: str, vocab: Vocabulary) -> list[UserRecord]:
    """Parse a JSON usage log (array of device entries) into UserRecords.

    Sessions that do not end in the stop view get a synthetic stop event
    stamped with the session's last timestamp. Empty session arrays are
    dropped. All unknown view names are collected and reported together.
    """
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as exc:
        offset = len(document[: exc.pos].encode("utf-8"))
        raise LogParseError(f"malformed log: {exc.msg}", offset) from None
    if not isinstance(doc, list):
        raise LogParseError("log document must be a JSON array of device entries", 0)

    unknown: list[str] = []
    records = []
    for u, entry in enumerate(doc):
        where = f"entry {u}"
        if not isinstance(entry, dict):
            raise LogParseError(f"{where}: expected an object")
        try:
            device = str(entry["deviceid"])
            first = _parse_time(entry["firstSeen"], where)
            last = _parse_time(entry["lastSeen"], where)
            raw_sessions = entry["sessions"]
        except KeyError as exc:
            raise LogParseError(f"{where}: missing key {exc.args[0]!r}") from None
        if first > last:
            raise LogParseError(f"{where}: firstSeen is after lastSeen")
        if not isinstance(raw_sessions, list):
            raise LogParseError(f"{where}: 'sessions' must be an array")

        sessions = []
        for s, raw in enumerate(raw_sessions):
            if not isinstance(raw, list):
                raise LogParseError(f"{where}, session {s}: expected an array of events")
            events = []
            for e, ev in enumerate(raw):
                ewhere = f"{where}, session {s}, event {e}"
                if not isinstance(ev, dict) or "timestamp" not in ev or "data" not in ev:
                    raise LogParseError(f"{ewhere}: expected {{timestamp, data}}")
                ts = _parse_time(ev["timestamp"], ewhere)
                name = ev["data"]
                if name not in vocab._lookup:
                    if name not in unknown:
                        unknown.append(str(name))
                    continue
                if events and ts < events[-1][0]:
                    raise LogParseError(f"{ewhere}: timestamps decrease within session")
                events.append((ts, vocab.index(name)))
            if not events:
                continue
            if events[-1][1] != vocab.stop_state:
                events.append((events[-1][0], vocab.stop_state))
            sessions.append(Session(tuple(events)))
        records.append(UserRecord(device, first, last, tuple(sessions)))

    if unknown:
        raise VocabularyError(f"unknown view names: {', '.join(map(repr, unknown))}", unknown)
    return records


def serialize_log(records: Iterable[UserRecord], vocab: Vocabulary) -> str:
    """Inverse of :func:`parse_log`, in the same JSON shape."""
    doc = []
    for rec in records:
        doc.append({
            "deviceid": rec.device_id,
            "totalevents": sum(len(s.events) for s in rec.sessions),
            "firstSeen": format_time(rec.first_seen),
            "lastSeen": format_time(rec.last_seen),
            "sessions": [
                [{"timestamp": format_time(ts), "data": vocab.name(sid)} for ts, sid in s.events]
                for s in rec.sessions
            ],
        })
    return json.dumps(doc, indent=1) + "\n"


def apply_time_cut(records: Sequence[UserRecord], cut: TimeCut, vocab: Vocabulary,
                   start_symbol: int | None = None) -> TraceSet:
    """Keep sessions starting inside the cut and flatten them into one trace per user.

    A session is assigned by its first timestamp. The cut-start symbol
    (default: the vocabulary start view) is prepended when a trace does not
    already begin with it. Users with no kept sessions are omitted.
    """
    start = vocab.start_state if start_symbol is None else start_symbol
    traces = []
    for rec in records:
        lo = rec.first_seen + cut.d1 * SECONDS_PER_DAY
        hi = rec.first_seen + cut.d2 * SECONDS_PER_DAY
        seq: list[int] = []
        for session in rec.sessions:
            if lo <= session.start_time < hi:
                seq.extend(session.states)
        if not seq:
            continue
        if seq[0] != start:
            seq.insert(0, start)
        traces.append((rec.device_id, seq))
    return TraceSet(vocab, traces, start)


def count_matrix(trace: Sequence[int], vocab: Vocabulary) -> np.ndarray:
    """counts[i, j] = number of adjacent (i, j) pairs in ``trace``."""
    if len(trace) < 2:
        raise InputError("trace must contain at least 2 states")
    n = vocab.size
    seq = np.asarray(trace, dtype=np.int64)
    if seq.min() < 0 or seq.max() >= n:
        raise InputError(f"trace has state ids outside 0..{n - 1}")
    counts = np.zeros((n, n), dtype=np.int64)
    np.add.at(counts, (seq[:-1], seq[1:]), 1)
    return counts
