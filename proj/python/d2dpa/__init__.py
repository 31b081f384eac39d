"""Python bindings for the d2dpa workbench."""

try:
    from ._d2dpa import *  # noqa: F401,F403
    from ._d2dpa import __version__  # noqa: F401
except ImportError:  # build-tree layout: extension lives next to the package
    from _d2dpa import *  # noqa: F401,F403
    from _d2dpa import __version__  # noqa: F401
