"""Neural rating regression with abstractive tips generation."""
from nrt.kernels import BACKEND as KERNEL_BACKEND
from nrt.model import NRT, Hypers

__version__ = "0.1.0"
__all__ = ["NRT", "Hypers", "KERNEL_BACKEND", "__version__"]
