"""PU learning toolkit: debiased contrastive pretraining and imbalanced
nnPU probes, backed by the C++ core."""

from pukit._core import *  # noqa: F401,F403
from pukit._core import __version__  # noqa: F401
