"""Width multiplier search, size accounting and rate-distortion curves."""

from ._core import *  # noqa: F401,F403
