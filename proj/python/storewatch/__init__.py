"""Face detection with age, gender and expression estimation."""

from ._core import *  # noqa: F401,F403
from ._core import __doc__  # noqa: F401

EXPRESSIONS = ("angry", "disgust", "fear", "happy", "sad", "surprise", "neutral")
AGE_GROUPS = ("0-9", "10-19", "20-29", "30-39", "40-49", "50-59", "60-69", "70-79")
