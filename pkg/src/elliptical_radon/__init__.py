"""Elliptical Radon transform toolkit: forward model, Fourier and chirp inversions, analysis."""

__version__ = "0.1.0"

from .core import *  # noqa: E402,F401,F403
from .exceptions import *  # noqa: E402,F401,F403
from .transform import *  # noqa: E402,F401,F403
from .spectral import *  # noqa: E402,F401,F403
from .chirp import *  # noqa: E402,F401,F403
from .analysis import *  # noqa: E402,F401,F403
from . import io  # noqa: E402,F401
