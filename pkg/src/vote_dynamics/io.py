"""Reading and writing vote streams, fitted parameters and reports.

Corpus files are JSON lines. The first line is a header::

    {"schema": "vote-dynamics/votes", "version": 1, "time_unit": "digg"}

followed by ``{"type": "story", ...}`` rows with story metadata and
``{"type": "vote", ...}`` rows. A vote row carries either ``time`` (hours
since submission, in the header's unit) or ``timestamp`` (absolute, ISO-8601
or epoch seconds). Raw CSV streams with columns ``story_id, voter_id,
timestamp[, is_fan]`` are accepted as well; fan labels can then be derived
from a ``fan_id, friend_id`` edge list.
"""

from __future__ import annotations

import csv
import json
import math
import os
import tempfile
from collections import defaultdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import ActivityClock, InputError, StoryParams, StoryRecord, TimeUnit, VoteEvent

SCHEMA_VERSION = 1
VOTES_SCHEMA = "vote-dynamics/votes"
TRUTH_SCHEMA = "vote-dynamics/truth"
FIT_SCHEMA = "vote-dynamics/fit"
CLOCK_SCHEMA = "vote-dynamics/clock"
REPORT_SCHEMA = "vote-dynamics/report"


def atomic_write(path, text: str) -> None:
    """Write ``text`` to ``path`` through a temporary file and a rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _clean(x):
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, (np.floating,)):
        return _clean(float(x))
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    return x


def dumps(obj) -> str:
    return json.dumps(_clean(obj), sort_keys=True, allow_nan=False)


def write_json(path, obj) -> None:
    atomic_write(path, json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n")


def read_json(path, schema: Optional[str] = None) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if schema is not None:
        _check_header(obj, schema, path)
    return obj


def _check_header(obj, schema, path):
    if not isinstance(obj, dict) or obj.get("schema") != schema:
        raise InputError(f"{path}: expected schema {schema!r}")
    if obj.get("version") != SCHEMA_VERSION:
        raise InputError(f"{path}: unsupported schema version {obj.get('version')!r}")


def parse_timestamp(value) -> float:
    """Absolute timestamp (ISO-8601 string or epoch seconds) to epoch hours."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        secs = float(value)
    else:
        text = str(value).strip()
        try:
            secs = float(text)
        except ValueError:
            try:
                dt = datetime.fromisoformat(text.replace("Z", "+00:00"))
            except ValueError as exc:
                raise InputError(f"unparseable timestamp {value!r}") from exc
            if dt.tzinfo is None:
                dt = dt.replace(tzinfo=timezone.utc)
            secs = dt.timestamp()
    if not math.isfinite(secs):
        raise InputError(f"non-finite timestamp {value!r}")
    return secs / 3600.0


def _parse_bool(value) -> Optional[bool]:
    if value is None or value == "":
        return None
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "t", "yes", "y"):
        return True
    if text in ("0", "false", "f", "no", "n"):
        return False
    raise InputError(f"not a boolean: {value!r}")


# -- fan graph -------------------------------------------------------------------


def read_fan_graph(path) -> dict:
    """Edge list CSV ``fan_id, friend_id``; returns ``{friend: set of fans}``."""
    fans = defaultdict(set)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or not {"fan_id", "friend_id"} <= set(reader.fieldnames):
                raise InputError(f"{path}: fan graph needs columns fan_id, friend_id")
            for row in reader:
                fans[row["friend_id"]].add(row["fan_id"])
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    return dict(fans)


def label_fans(voters: Sequence[str], fans_of: dict) -> list:
    """``is_fan`` per vote: the voter is a fan of some earlier voter on the story."""
    seen_fans = set()
    out = []
    for i, v in enumerate(voters):
        out.append(i > 0 and v in seen_fans)
        seen_fans |= fans_of.get(v, set())
    return out


# -- corpus reading --------------------------------------------------------------


def _build_records(votes_by_story: dict, meta: dict, time_unit: TimeUnit, fans_of: Optional[dict]) -> list:
    records = []
    for sid in sorted(set(votes_by_story) | set(meta)):
        rows = votes_by_story.get(sid, [])
        m = meta.get(sid, {})
        if not rows:
            raise InputError(f"story {sid!r} has no votes")
        absolute = [r for r in rows if r.get("abs") is not None]
        if absolute and len(absolute) != len(rows):
            raise InputError(f"story {sid!r} mixes relative and absolute vote times")
        if absolute:
            sub = m.get("submission_time")
            sub = min(r["abs"] for r in rows) if sub is None else parse_timestamp(sub)
            times = [r["abs"] - sub for r in rows]
            promo = m.get("promotion_time")
            if promo is not None and not isinstance(promo, (int, float)):
                promo = parse_timestamp(promo) - sub
        else:
            sub = float(m.get("submission_time") or 0.0)
            times = [r["time"] for r in rows]
            promo = m.get("promotion_time")
        order = sorted(range(len(rows)), key=lambda i: (times[i], rows[i]["voter_id"]))
        voters = [rows[i]["voter_id"] for i in order]
        flags = [rows[i].get("is_fan") for i in order]
        if fans_of is not None:
            flags = label_fans(voters, fans_of)
        elif any(f is None for f in flags):
            raise InputError(f"story {sid!r}: is_fan missing and no fan graph given")
        votes = tuple(VoteEvent(sid, voters[j], float(times[order[j]]), bool(flags[j])) for j in range(len(order)))
        records.append(StoryRecord(
            sid, votes, submitter_fans=int(m.get("submitter_fans", 0)), submission_time=float(sub),
            promotion_time=None if promo is None else float(promo),
            final_votes=None if m.get("final_votes") is None else int(m["final_votes"]),
            time_unit=time_unit,
            observed_until=None if m.get("observed_until") is None else float(m["observed_until"]),
        ))
    if not records:
        raise InputError("no stories in input")
    return records


def _vote_row(raw: dict, where: str) -> tuple:
    try:
        sid = str(raw["story_id"])
        voter = str(raw["voter_id"])
    except KeyError as exc:
        raise InputError(f"{where}: vote row lacks {exc.args[0]!r}") from exc
    row = {"voter_id": voter, "is_fan": _parse_bool(raw.get("is_fan")), "abs": None, "time": None}
    if raw.get("time") not in (None, ""):
        row["time"] = float(raw["time"])
    elif raw.get("timestamp") not in (None, ""):
        row["abs"] = parse_timestamp(raw["timestamp"])
    else:
        raise InputError(f"{where}: vote row needs time or timestamp")
    return sid, row


_STORY_KEYS = {"type", "story_id", "submitter_fans", "submission_time", "promotion_time", "final_votes",
               "observed_until"}


def read_corpus_jsonl(path, fan_graph: Optional[dict] = None) -> list:
    votes = defaultdict(list)
    meta = {}
    time_unit = TimeUnit.DIGG
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    with fh:
        header_seen = False
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise InputError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if "schema" in obj:
                _check_header(obj, VOTES_SCHEMA, path)
                time_unit = TimeUnit(obj.get("time_unit", "digg"))
                header_seen = True
                continue
            kind = obj.get("type", "vote")
            if kind == "story":
                extra = set(obj) - _STORY_KEYS
                if extra:
                    raise InputError(f"{path}:{lineno}: unknown story field(s) {sorted(extra)}")
                meta[str(obj["story_id"])] = obj
            elif kind == "vote":
                sid, row = _vote_row(obj, f"{path}:{lineno}")
                votes[sid].append(row)
            else:
                raise InputError(f"{path}:{lineno}: unknown row type {kind!r}")
    if not header_seen and not votes:
        raise InputError(f"{path}: empty input")
    if any(r["abs"] is not None for rows in votes.values() for r in rows):
        time_unit = TimeUnit.WALL
    return _build_records(votes, meta, time_unit, fan_graph)


def read_corpus_csv(path, fan_graph: Optional[dict] = None, stories_path=None,
                    time_unit: TimeUnit = TimeUnit.WALL) -> list:
    votes = defaultdict(list)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if not reader.fieldnames or not {"story_id", "voter_id"} <= set(reader.fieldnames):
                raise InputError(f"{path}: need columns story_id, voter_id and timestamp or time")
            for lineno, raw in enumerate(reader, 2):
                sid, row = _vote_row(raw, f"{path}:{lineno}")
                votes[sid].append(row)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    if not votes:
        raise InputError(f"{path}: no votes")
    meta = {}
    if stories_path is not None:
        with open(stories_path, newline="", encoding="utf-8") as fh:
            for raw in csv.DictReader(fh):
                meta[raw["story_id"]] = {k: (None if v == "" else v) for k, v in raw.items()}
                for key in ("submitter_fans", "final_votes"):
                    if meta[raw["story_id"]].get(key) is not None:
                        meta[raw["story_id"]][key] = int(meta[raw["story_id"]][key])
                for key in ("observed_until",):
                    if meta[raw["story_id"]].get(key) is not None:
                        meta[raw["story_id"]][key] = float(meta[raw["story_id"]][key])
    return _build_records(votes, meta, time_unit, fan_graph)


def read_corpus(path, fan_graph_path=None, stories_path=None) -> list:
    """Load stories from a JSON-lines or CSV vote stream."""
    fans = read_fan_graph(fan_graph_path) if fan_graph_path else None
    if str(path).endswith(".csv"):
        return read_corpus_csv(path, fans, stories_path)
    return read_corpus_jsonl(path, fans)


# -- corpus writing ---------------------------------------------------------------


def corpus_to_jsonl(records: Iterable[StoryRecord]) -> str:
    records = list(records)
    units = {r.time_unit for r in records}
    if len(units) > 1:
        raise InputError("records mix time units")
    unit = units.pop() if units else TimeUnit.DIGG
    lines = [dumps({"schema": VOTES_SCHEMA, "version": SCHEMA_VERSION, "time_unit": unit.value})]
    for r in records:
        lines.append(dumps({"type": "story", "story_id": r.story_id, "submitter_fans": r.submitter_fans,
                            "submission_time": r.submission_time, "promotion_time": r.promotion_time,
                            "final_votes": r.final_votes, "observed_until": r.observed_until}))
        for v in r.votes:
            lines.append(dumps({"type": "vote", "story_id": r.story_id, "voter_id": v.voter_id,
                                "time": v.time, "is_fan": v.is_fan}))
    return "\n".join(lines) + "\n"


def write_corpus(path, records: Iterable[StoryRecord]) -> None:
    atomic_write(path, corpus_to_jsonl(records))


def write_truth(path, records: Sequence[StoryRecord], params: Sequence[StoryParams], config: dict) -> None:
    write_json(path, {"schema": TRUTH_SCHEMA, "version": SCHEMA_VERSION, "config": config,
                      "stories": [dict(story_id=r.story_id, **p.to_dict()) for r, p in zip(records, params)]})


def read_truth(path) -> dict:
    obj = read_json(path, TRUTH_SCHEMA)
    return {s["story_id"]: StoryParams(S=int(s["S"]), r_fan=s.get("r_fan"), r_nonfan=s.get("r_nonfan"),
                                       r=s.get("r")) for s in obj["stories"]}


def write_clock(path, clock: ActivityClock) -> None:
    write_json(path, {"schema": CLOCK_SCHEMA, "version": SCHEMA_VERSION, **clock.to_dict()})


def read_clock(path) -> ActivityClock:
    obj = read_json(path, CLOCK_SCHEMA)
    return ActivityClock.from_dict(obj)


def read_event_times(path) -> np.ndarray:
    """Absolute times (epoch hours) of all votes in a raw stream, sorted."""
    out = []
    if str(path).endswith(".csv"):
        with open(path, newline="", encoding="utf-8") as fh:
            for raw in csv.DictReader(fh):
                out.append(parse_timestamp(raw["timestamp"]))
    else:
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                if "timestamp" in obj:
                    out.append(parse_timestamp(obj["timestamp"]))
    if not out:
        raise InputError(f"{path}: no timestamped votes")
    return np.sort(np.array(out))
