"""Python bindings for the change-point joint model core."""

from ._cpjm import *  # noqa: F401,F403
from ._cpjm import __doc__  # noqa: F401
