"""Point-language grounding pipeline bindings."""

from ._ham import *  # noqa: F401,F403
from ._ham import __version__  # noqa: F401
