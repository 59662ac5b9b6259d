# src/utils.py

import hashlib
import logging
import math

logger = logging.getLogger(__name__)


def format_duration(seconds: float) -> str:
    """Formats a duration in seconds into a human-readable string."""
    if seconds < 1:
        return f"{seconds * 1000:.0f} ms"
    if seconds < 60:
        return f"{seconds:.2f} seconds"

    minutes, sec = divmod(int(seconds), 60)
    if minutes < 60:
        return f"{minutes} minutes and {sec} seconds"

    hours, mins = divmod(minutes, 60)
    return f"{hours} hours and {mins} minutes"


def format_rate(count: int, seconds: float, unit: str = "frames") -> str:
    if seconds <= 0 or not math.isfinite(seconds):
        return f"{count} {unit}"
    return f"{count} {unit} ({count / seconds:.1f} {unit}/s)"


def short_digest(text: str, length: int = 12) -> str:
    """Stable short identifier for cache keys and provenance echoes."""
    return hashlib.sha1(text.encode("utf-8")).hexdigest()[:length]
