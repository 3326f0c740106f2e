"""Domain types shared across the package, and the activity ("Digg time") clock."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

DIGG_HOUR_VOTES = 2500.0
UPCOMING_LIFETIME = 24.0


class InputError(ValueError):
    """Raised for malformed or inconsistent user input."""


class TimeUnit(str, enum.Enum):
    WALL = "wall"
    DIGG = "digg"


class Variant(str, enum.Enum):
    V1 = "v1"
    V2 = "v2"


@dataclass(frozen=True)
class VoteEvent:
    """A single vote on a story.

    ``time`` is measured in hours since the story's submission, in the time
    unit of the owning :class:`StoryRecord`.
    """

    story_id: str
    voter_id: str
    time: float
    is_fan: bool = False

    def __post_init__(self):
        if not np.isfinite(self.time) or self.time < 0:
            raise InputError(f"vote time must be finite and non-negative, got {self.time}")

    def sort_key(self):
        return (self.time, self.voter_id)


@dataclass(frozen=True)
class StoryRecord:
    story_id: str
    votes: tuple
    submitter_fans: int = 0
    submission_time: float = 0.0
    promotion_time: Optional[float] = None
    final_votes: Optional[int] = None
    time_unit: TimeUnit = TimeUnit.DIGG
    observed_until: Optional[float] = None

    def __post_init__(self):
        votes = tuple(sorted(self.votes, key=VoteEvent.sort_key))
        if not votes:
            raise InputError(f"story {self.story_id!r} has no votes; the submitter vote is required")
        if votes[0].is_fan:
            raise InputError(f"story {self.story_id!r}: the first (submitter) vote cannot be a fan vote")
        if self.submitter_fans < 0:
            raise InputError("submitter_fans must be non-negative")
        if self.promotion_time is not None:
            if self.promotion_time < votes[0].time:
                raise InputError(f"story {self.story_id!r}: promotion precedes the first vote")
        if self.final_votes is not None and self.final_votes < 0:
            raise InputError("final_votes must be non-negative")
        if self.observed_until is not None and self.observed_until < votes[-1].time:
            raise InputError(f"story {self.story_id!r}: observed_until precedes the last vote")
        object.__setattr__(self, "votes", votes)
        object.__setattr__(self, "time_unit", TimeUnit(self.time_unit))

    @property
    def n_votes(self) -> int:
        return len(self.votes)

    @property
    def times(self) -> np.ndarray:
        return np.array([v.time for v in self.votes], dtype=float)

    @property
    def fan_mask(self) -> np.ndarray:
        return np.array([v.is_fan for v in self.votes], dtype=bool)

    @property
    def promoted(self) -> bool:
        return self.promotion_time is not None

    @property
    def outcome(self) -> Optional[int]:
        """Final vote count if recorded, else the number of observed votes."""
        return self.final_votes

    def votes_at_promotion(self) -> Optional[int]:
        """Number of votes cast at or before promotion (vote-then-promotion ordering)."""
        if self.promotion_time is None:
            return None
        return int(np.searchsorted(self.times, self.promotion_time, side="right"))

    def truncate(self, n_votes: int) -> "StoryRecord":
        """Keep the first ``n_votes`` votes and drop anything observed later.

        Promotion is retained only if it happened no later than the last kept
        vote, and the observation window ends at that vote. ``final_votes`` is
        preserved as the known outcome.
        """
        if n_votes < 1:
            raise InputError("a truncated story keeps at least the submitter vote")
        if n_votes >= self.n_votes:
            return self
        kept = self.votes[:n_votes]
        promo = self.promotion_time
        if promo is not None and promo > kept[-1].time:
            promo = None
        return replace(self, votes=kept, promotion_time=promo, observed_until=kept[-1].time)

    def observation_end(self) -> float:
        return self.votes[-1].time if self.observed_until is None else self.observed_until


@dataclass(frozen=True)
class StoryParams:
    """Per-story unknowns: ``r`` for V1, ``(r_fan, r_nonfan)`` for V2."""

    S: int = 0
    r: Optional[float] = None
    r_fan: Optional[float] = None
    r_nonfan: Optional[float] = None

    def __post_init__(self):
        if self.S < 0:
            raise InputError("S must be non-negative")
        for name in ("r", "r_fan", "r_nonfan"):
            val = getattr(self, name)
            if val is not None and not (0.0 <= val <= 1.0):
                raise InputError(f"{name} must be a probability, got {val}")
        if self.r is None and (self.r_fan is None or self.r_nonfan is None):
            raise InputError("give either r (V1) or both r_fan and r_nonfan (V2)")

    @property
    def variant(self) -> Variant:
        return Variant.V1 if self.r is not None else Variant.V2

    def to_dict(self) -> dict:
        out = {"S": int(self.S)}
        if self.r is not None:
            out["r"] = float(self.r)
        if self.r_fan is not None:
            out["r_fan"] = float(self.r_fan)
            out["r_nonfan"] = float(self.r_nonfan)
        return out


# -- activity clock -------------------------------------------------------------


@dataclass(frozen=True)
class ActivityClock:
    """Piecewise-linear monotone map from wall hours to Digg hours.

    ``wall`` holds strictly increasing breakpoints (hours) and ``votes`` the
    non-decreasing cumulative count of front-page votes at each breakpoint.
    """

    wall: np.ndarray
    votes: np.ndarray
    votes_per_digg_hour: float = DIGG_HOUR_VOTES
    _digg: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        wall = np.asarray(self.wall, dtype=float)
        votes = np.asarray(self.votes, dtype=float)
        if wall.ndim != 1 or wall.shape != votes.shape or wall.size < 2:
            raise InputError("clock needs at least two matching breakpoints")
        if np.any(np.diff(wall) <= 0):
            raise InputError("clock wall times must be strictly increasing")
        if np.any(np.diff(votes) < 0):
            raise InputError("cumulative vote counts must be non-decreasing")
        if self.votes_per_digg_hour <= 0:
            raise InputError("votes_per_digg_hour must be positive")
        object.__setattr__(self, "wall", wall)
        object.__setattr__(self, "votes", votes)
        object.__setattr__(self, "_digg", (votes - votes[0]) / self.votes_per_digg_hour)

    @classmethod
    def from_counts(cls, edges: Sequence[float], counts: Sequence[float],
                    votes_per_digg_hour: float = DIGG_HOUR_VOTES) -> "ActivityClock":
        """Clock from binned front-page vote counts, rate uniform within each bin."""
        edges = np.asarray(edges, dtype=float)
        counts = np.asarray(counts, dtype=float)
        if edges.size != counts.size + 1:
            raise InputError("need len(edges) == len(counts) + 1")
        if np.any(counts < 0):
            raise InputError("counts must be non-negative")
        cum = np.concatenate([[0.0], np.cumsum(counts)])
        return cls(edges, cum, votes_per_digg_hour)

    def _slopes(self):
        d = np.diff(self._digg) / np.diff(self.wall)
        mean = (self._digg[-1] - self._digg[0]) / (self.wall[-1] - self.wall[0])
        return d[0], d[-1], mean

    def to_digg_time(self, t):
        """Digg hours elapsed since the first breakpoint at wall time ``t``."""
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.wall, self._digg)
        lo, hi, _ = self._slopes()
        out = np.where(t < self.wall[0], self._digg[0] + lo * (t - self.wall[0]), out)
        out = np.where(t > self.wall[-1], self._digg[-1] + hi * (t - self.wall[-1]), out)
        return out if out.ndim else float(out)

    def from_digg_time(self, d):
        """Inverse map; flat (zero-activity) stretches resolve to the earliest wall time."""
        d = np.asarray(d, dtype=float)
        lo, hi, mean = self._slopes()
        # index of first breakpoint whose digg value is >= d
        j = np.searchsorted(self._digg, d, side="left")
        j = np.clip(j, 1, self._digg.size - 1)
        d0, d1 = self._digg[j - 1], self._digg[j]
        w0, w1 = self.wall[j - 1], self.wall[j]
        span = d1 - d0
        with np.errstate(divide="ignore", invalid="ignore"):
            frac = np.where(span > 0, (d - d0) / span, 0.0)
        out = w0 + frac * (w1 - w0)
        # on a flat-entry boundary the earliest wall time is the left breakpoint
        out = np.where((span > 0) & (d == d0), w0, out)
        lo = lo if lo > 0 else mean
        hi = hi if hi > 0 else mean
        out = np.where(d < self._digg[0], self.wall[0] + (d - self._digg[0]) / lo, out)
        out = np.where(d > self._digg[-1], self.wall[-1] + (d - self._digg[-1]) / hi, out)
        return out if out.ndim else float(out)

    @property
    def span(self) -> tuple:
        return float(self.wall[0]), float(self.wall[-1])

    def to_dict(self) -> dict:
        return {
            "wall": self.wall.tolist(),
            "votes": self.votes.tolist(),
            "votes_per_digg_hour": self.votes_per_digg_hour,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ActivityClock":
        return cls(np.asarray(d["wall"]), np.asarray(d["votes"]), d.get("votes_per_digg_hour", DIGG_HOUR_VOTES))


def build_activity_clock(timestamps, votes_per_digg_hour: float = DIGG_HOUR_VOTES,
                         start: Optional[float] = None, end: Optional[float] = None) -> ActivityClock:
    """Build a clock from a sorted stream of front-page vote times (hours).

    The Digg time between two wall times is the number of front-page votes in
    ``(t1, t2]`` divided by ``votes_per_digg_hour``; it is exact at every event
    time and linear in between. ``start`` defaults to the first event (which is
    then not counted) and ``end`` to the last.
    """
    ts = np.asarray(timestamps, dtype=float)
    if ts.ndim != 1 or ts.size < 2:
        raise InputError("need at least two front-page vote events to build a clock")
    if not np.all(np.isfinite(ts)):
        raise InputError("timestamps must be finite")
    if np.any(np.diff(ts) < 0):
        raise InputError("timestamps must be sorted")
    start = ts[0] if start is None else float(start)
    if start > ts[0]:
        raise InputError("start must not be after the first event")
    # collapse ties: breakpoint at each distinct time with the count through it
    uniq, idx = np.unique(ts, return_index=True)
    last = np.r_[idx[1:], ts.size]  # count of events with time <= uniq[i]
    wall, cum = uniq, last.astype(float)
    if start < uniq[0]:
        wall, cum = np.r_[start, wall], np.r_[0.0, cum]
    else:
        # the first event sits at the origin and is not counted
        cum = cum - cum[0]
    if end is not None:
        end = float(end)
        if end < wall[-1]:
            raise InputError("end must not precede the last event")
        if end > wall[-1]:
            wall, cum = np.r_[wall, end], np.r_[cum, cum[-1]]
    return ActivityClock(wall, cum, votes_per_digg_hour)


def story_to_digg_time(story: StoryRecord, clock: ActivityClock) -> StoryRecord:
    """Re-express a wall-time story in Digg hours since its submission."""
    if story.time_unit == TimeUnit.DIGG:
        return story
    t0 = story.submission_time
    base = clock.to_digg_time(t0)

    def conv(t):
        return float(clock.to_digg_time(t0 + t) - base)

    votes = tuple(replace(v, time=max(conv(v.time), 0.0)) for v in story.votes)
    promo = None if story.promotion_time is None else max(conv(story.promotion_time), 0.0)
    until = None if story.observed_until is None else max(conv(story.observed_until), votes[-1].time)
    return replace(story, votes=votes, promotion_time=promo, observed_until=until, time_unit=TimeUnit.DIGG)
