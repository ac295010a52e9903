import json as _json

from ._core import *  # noqa: F401,F403
from . import _core
from ._core import __version__

__all__ = [n for n in dir(_core) if not n.startswith("_")] + ["fit"]


def fit(graph, y, e, **kwargs):
    """Fit a model and return the full result as a dict.

    Accepts the same keyword arguments as fit_json; see its docstring.
    """
    return _json.loads(_core.fit_json(graph, y, e, **kwargs))
