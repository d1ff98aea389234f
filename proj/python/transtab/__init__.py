try:
    from ._core import *  # installed layout
except ImportError:  # in-build layout used by the ctest smoke run
    from _core import *
