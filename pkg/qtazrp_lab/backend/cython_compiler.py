from . import utils

EXTENSION = "pyx"

CYTHON_PREAMBLE = """
# cython: language_level=3
# cython: boundscheck=False
# cython: wraparound=False
# cython: initializedcheck=False
# cython: nonecheck=False
# cython: cdivision=True
"""

BATCH_TEMPLATE = """
import numpy as np
cimport numpy as cnp
from cython.parallel import prange

cnp.import_array()


cpdef cnp.ndarray[cnp.float64_t, ndim=1] {func_name}_batch(cnp.ndarray[cnp.float64_t, ndim=1] replicas):
    cdef double[::1] r = np.ascontiguousarray(replicas)
    cdef double[::1] out = np.empty(r.shape[0], dtype=np.float64)
    cdef Py_ssize_t i
    for i in prange(r.shape[0], nogil=True):
        out[i] = {func_name}(r[i])
    return np.asarray(out)
"""


def _checked(code: str, func_name: str) -> str:
    if utils.count_params(code, func_name) != 1:
        raise ValueError(f"kernel {func_name} must take a single double replica index")
    return f"{CYTHON_PREAMBLE}\n{code}\n"


def default_wrapper(code: str, func_name: str, module_name: str) -> tuple[str, str]:
    return _checked(code, func_name), func_name


def batch_wrapper_numpy(code: str, func_name: str, module_name: str) -> tuple[str, str]:
    return f"{_checked(code, func_name)}\n{BATCH_TEMPLATE.format(func_name=func_name)}", f"{func_name}_batch"
