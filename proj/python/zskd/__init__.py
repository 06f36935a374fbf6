"""Zero-shot knowledge distillation for text classifiers."""

from zskd._zskd import *  # noqa: F401,F403
