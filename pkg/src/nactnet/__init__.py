"""1-Lipschitz networks with the N-activation."""

from .activations import Kind, NActParams, maxmin, maxmin_as_abs_identity, n_act, n_act_grad
from .compiler import (
    CompileReport,
    compile,
    compile_bounded,
    compile_grad1_tails,
    compile_increasing,
    slope_coeffs,
    verify_compiled,
)
from .kernels import BACKEND_NAME
from .pwl import CpwlError, CpwlFunction, cpwl_eval, cpwl_new, cpwl_random, n_function

__version__ = "0.1.0"
