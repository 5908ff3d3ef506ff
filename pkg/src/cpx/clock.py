"""Simulated calendar shared by every actor in an ecosystem run."""

from __future__ import annotations

from datetime import datetime, timedelta, timezone

DEFAULT_START = datetime(2020, 6, 1, 9, 0, tzinfo=timezone.utc)


def iso(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def parse_iso(text: str) -> datetime:
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


class SimClock:
    """Monotone simulated clock.

    ``tick`` advances one second per recorded event so that events logged
    within the same simulated minute still carry strictly increasing stamps.
    """

    def __init__(self, start: datetime = DEFAULT_START):
        self._now = start

    def now(self) -> datetime:
        return self._now

    def iso(self) -> str:
        return iso(self._now)

    def tick(self) -> str:
        self._now += timedelta(seconds=1)
        return iso(self._now)

    def advance(self, **delta: float) -> None:
        step = timedelta(**delta)
        if step < timedelta(0):
            raise ValueError("simulated clock cannot run backwards")
        self._now += step

    def set_at_least(self, moment: datetime) -> None:
        if moment > self._now:
            self._now = moment
