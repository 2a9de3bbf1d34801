"""Adjoint-matching fine-tuning of small flow models (C++ core)."""

from ._core import *  # noqa: F401,F403
from ._core import __version__  # noqa: F401
