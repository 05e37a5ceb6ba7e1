"""Explanatory path finding over knowledge graphs.

Thin wrapper around the compiled `_rex` extension: graph loading and
indexing, information content, policy training, beam inference,
explanation assembly helpers, and ranking metrics.
"""

try:
    from ._rex import *  # noqa: F401,F403  (installed package layout)
    from ._rex import __version__  # noqa: F401
except ImportError:  # built in-tree: extension sits on PYTHONPATH
    from _rex import *  # noqa: F401,F403
    from _rex import __version__  # noqa: F401
