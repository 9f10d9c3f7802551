"""Estimation / event / post-event window layout on a trading-date axis.

The event day is index 0 of relative time; the estimation window ends
before the widest event window opens, and the post-event window starts the
day after the event.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from datetime import date
from typing import Sequence


class WindowError(ValueError):
    """The requested layout cannot be built on the given axis."""


@dataclass(frozen=True)
class EventSpec:
    """Window configuration anchored at one event date.

    ``estimation_length=None`` uses all pre-event history left over after
    the gap and widest event window, capped at ``max_estimation_length``.
    """

    event_date: date
    estimation_length: int | None = None
    pre_event_gap: int = 0
    event_half_widths: tuple[int, ...] = (2, 5, 10)
    post_event_length: int = 30
    max_estimation_length: int = 250

    def __post_init__(self) -> None:
        widths = tuple(self.event_half_widths)
        object.__setattr__(self, "event_half_widths", widths)
        if not widths:
            raise WindowError("at least one event half-width is required")
        if any(w < 1 for w in widths):
            raise WindowError("event half-widths must be positive")
        if list(widths) != sorted(set(widths)):
            raise WindowError("event half-widths must be ascending without duplicates")
        if self.pre_event_gap < 0:
            raise WindowError("pre_event_gap must be non-negative")
        if self.post_event_length < 1:
            raise WindowError("post_event_length must be positive")
        if self.estimation_length is not None and self.estimation_length < 3:
            raise WindowError("estimation_length must be at least 3 trading days")
        if self.max_estimation_length < 3:
            raise WindowError("max_estimation_length must be at least 3")

    @property
    def widest(self) -> int:
        return self.event_half_widths[-1]


@dataclass(frozen=True)
class WindowLayout:
    """Index partition of a date axis around the event day."""

    axis: tuple[date, ...]
    event_index: int
    estimation_range: tuple[int, int]
    event_ranges: dict[int, tuple[int, int]]
    post_range: tuple[int, int]

    @property
    def widest(self) -> int:
        return max(self.event_ranges)

    @property
    def estimation_length(self) -> int:
        lo, hi = self.estimation_range
        return hi - lo + 1

    def estimation_indices(self) -> range:
        lo, hi = self.estimation_range
        return range(lo, hi + 1)

    def event_indices(self, half_width: int | None = None) -> range:
        w = self.widest if half_width is None else half_width
        try:
            lo, hi = self.event_ranges[w]
        except KeyError:
            raise WindowError(f"no event window with half-width {w}") from None
        return range(lo, hi + 1)

    def post_indices(self) -> range:
        lo, hi = self.post_range
        return range(lo, hi + 1)

    def offsets(self, half_width: int | None = None) -> range:
        """Relative days tau covered by an event window."""
        w = self.widest if half_width is None else half_width
        return range(-w, w + 1)


def locate_event(axis: Sequence[date], event_date: date) -> int:
    """Index of the event day on the axis.

    If the event date is not a trading day, the first trading day strictly
    after it is used. An event after the last axis date is an error.
    """
    if not axis:
        raise WindowError("empty date axis")
    i = bisect.bisect_left(axis, event_date)
    if i == len(axis):
        raise WindowError(
            f"event date {event_date.isoformat()} falls after the last "
            f"axis date {axis[-1].isoformat()}"
        )
    return i


def build_layout(axis: Sequence[date], spec: EventSpec) -> WindowLayout:
    """Partition the axis into estimation, event, and post-event windows.

    The estimation window covers ``estimation_length`` days ending
    ``pre_event_gap`` days before the widest event window opens; each
    event window spans ``[event_index - w, event_index + w]``; the
    post-event window spans ``post_event_length`` days starting the day
    after the event.
    """
    axis = tuple(axis)
    event_index = locate_event(axis, spec.event_date)
    w_max = spec.widest

    available = event_index - w_max - spec.pre_event_gap
    if spec.estimation_length is None:
        length = min(available, spec.max_estimation_length)
        if length < 3:
            raise WindowError(
                f"only {max(available, 0)} pre-event days available for estimation; "
                f"need at least 3"
            )
    else:
        length = spec.estimation_length
        if available < length:
            raise WindowError(
                f"insufficient pre-event history: estimation window needs "
                f"{length - max(available, 0)} more trading days"
            )

    est_hi = event_index - w_max - spec.pre_event_gap - 1
    est_lo = est_hi - length + 1

    needed_after = max(w_max, spec.post_event_length)
    have_after = len(axis) - 1 - event_index
    if have_after < needed_after:
        raise WindowError(
            f"insufficient post-event history: need {needed_after - have_after} "
            f"more trading days after the event"
        )

    event_ranges = {w: (event_index - w, event_index + w) for w in spec.event_half_widths}
    post_range = (event_index + 1, event_index + spec.post_event_length)
    return WindowLayout(axis, event_index, (est_lo, est_hi), event_ranges, post_range)
