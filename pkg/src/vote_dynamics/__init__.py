"""Rate-equation models of social voting: simulation, fitting and popularity prediction."""

from .core import (
    ActivityClock,
    InputError,
    StoryParams,
    StoryRecord,
    TimeUnit,
    VoteEvent,
    build_activity_clock,
    story_to_digg_time,
)
from .params import GlobalParamsV1, GlobalParamsV2

__version__ = "0.1.0"

__all__ = [
    "ActivityClock", "GlobalParamsV1", "GlobalParamsV2", "InputError", "StoryParams", "StoryRecord",
    "TimeUnit", "VoteEvent", "build_activity_clock", "story_to_digg_time",
]
