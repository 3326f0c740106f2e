"""Input checks shared by the estimator classes."""

from __future__ import annotations

from typing import Sequence

import numpy as np
from sklearn.utils.validation import check_is_fitted  # noqa: F401  (re-exported)

from .core import InputError, StoryRecord, TimeUnit


def check_records(X, digg_time: bool = True, min_stories: int = 1) -> list:
    """Validate a sequence of :class:`StoryRecord` and return it as a list."""
    if isinstance(X, StoryRecord):
        X = [X]
    try:
        records = list(X)
    except TypeError as exc:
        raise InputError("expected a sequence of StoryRecord") from exc
    if len(records) < min_stories:
        raise InputError(f"need at least {min_stories} stories, got {len(records)}")
    for r in records:
        if not isinstance(r, StoryRecord):
            raise InputError(f"expected StoryRecord, got {type(r).__name__}")
        if digg_time and r.time_unit != TimeUnit.DIGG:
            raise InputError(f"story {r.story_id!r} is in wall time; convert it with an activity clock first")
    return records


def check_histogram(counts) -> np.ndarray:
    h = np.asarray(counts, dtype=float)
    if h.ndim != 1 or h.size < 2:
        raise InputError("histogram must be a 1-d array indexed by count")
    if not np.all(np.isfinite(h)) or np.any(h < 0) or np.any(h != np.floor(h)):
        raise InputError("histogram entries must be non-negative integers")
    return h


def check_positive(values, name: str = "values") -> np.ndarray:
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise InputError(f"{name} is empty")
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise InputError(f"{name} must be finite and positive")
    return x


def check_outcomes(records: Sequence[StoryRecord]) -> np.ndarray:
    missing = [r.story_id for r in records if r.final_votes is None]
    if missing:
        raise InputError(f"{len(missing)} stories lack final_votes, e.g. {missing[0]!r}")
    return np.array([r.final_votes for r in records], dtype=float)
