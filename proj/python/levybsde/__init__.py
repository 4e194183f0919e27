from ._levybsde import *  # noqa: F401,F403
from ._levybsde import __version__  # noqa: F401
