"""Engagement-mood decoding and dropout prediction for question pool logs."""

try:
    from ._moodminer import *  # noqa: F401,F403
    from ._moodminer import __version__  # noqa: F401
except ImportError:  # running against a flat build tree
    from _moodminer import *  # noqa: F401,F403
    from _moodminer import __version__  # noqa: F401
