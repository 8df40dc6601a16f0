"""Per-station sensing of performance degradation.

Two detectors are available: an exponentially weighted moving average of
the serving queue length, and a trailing-window packet-drop rate.  Both
report threshold crossings edge-triggered, so a sustained overload fires
once until the signal falls back below the threshold.
"""
from __future__ import annotations

from collections import deque

from .engine import US_PER_S

WARMUP_SAMPLES = 3


class ThresholdTrigger:
    """Edge detector: fires on each upward crossing of a fixed threshold."""

    def __init__(self, threshold: float):
        self.threshold = threshold
        self._armed = True

    def feed(self, value: float) -> bool:
        if value > self.threshold:
            if self._armed:
                self._armed = False
                return True
            return False
        self._armed = True
        return False

    def reset(self) -> None:
        self._armed = True


class EwmaTracker:
    """Smoothed queue-length estimate E_t = a*y + (1 - a)*E_{t-1}.

    The estimate seeds from the first observation and no crossing is
    reported until the warm-up count of samples has been consumed.
    """

    def __init__(self, alpha: float, threshold: float,
                 warmup: int = WARMUP_SAMPLES):
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {alpha}")
        self.alpha = alpha
        self.threshold = threshold
        self.warmup = warmup
        self.value: float | None = None
        self.samples_seen = 0
        self._trigger = ThresholdTrigger(threshold)
        self._fired = False

    def update(self, y: float) -> float:
        self.samples_seen += 1
        if self.value is None:
            self.value = float(y)
        else:
            self.value = self.alpha * y + (1.0 - self.alpha) * self.value
        if self.samples_seen > self.warmup:
            self._fired = self._trigger.feed(self.value)
        else:
            self._fired = False
        return self.value

    def crossed(self) -> bool:
        """True once per upward crossing, evaluated at the latest update."""
        return self._fired

    @property
    def above(self) -> bool:
        return self.value is not None and self.value > self.threshold

    def reset(self) -> None:
        self.value = None
        self.samples_seen = 0
        self._fired = False
        self._trigger.reset()


class DropRateTracker:
    """Share of attempted transmissions dropped in the trailing window."""

    def __init__(self, threshold: float, window_us: int = US_PER_S):
        self.threshold = threshold
        self.window_us = window_us
        self._attempts: deque[tuple[int, bool]] = deque()
        self._drops = 0
        self._trigger = ThresholdTrigger(threshold)
        self._fired = False

    def record(self, now: int, dropped: bool) -> None:
        self._attempts.append((now, dropped))
        if dropped:
            self._drops += 1
        self._evict(now)
        self._fired = self._trigger.feed(self.rate(now))

    def rate(self, now: int) -> float:
        self._evict(now)
        if not self._attempts:
            return 0.0
        return self._drops / len(self._attempts)

    def crossed(self) -> bool:
        return self._fired

    def above(self, now: int) -> bool:
        return self.rate(now) > self.threshold

    def reset(self) -> None:
        self._attempts.clear()
        self._drops = 0
        self._fired = False
        self._trigger.reset()

    def _evict(self, now: int) -> None:
        cutoff = now - self.window_us
        att = self._attempts
        while att and att[0][0] <= cutoff:
            if att.popleft()[1]:
                self._drops -= 1
