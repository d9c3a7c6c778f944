"""Array-in/array-out bindings for external training loops.

Exactly three callables plus a version string; see each docstring for
the boundary contract (inputs copied, fields narrowed to float32, dot
coordinates kept exact).
"""

from topoloc_np._impl import __version__, py_extract, py_loss, py_persistence

__all__ = ["py_persistence", "py_loss", "py_extract", "__version__"]
