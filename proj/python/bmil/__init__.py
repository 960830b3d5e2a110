try:
    from ._bmil import *  # noqa: F401,F403  (installed package layout)
except ImportError:
    from _bmil import *  # noqa: F401,F403  (build-tree layout)
