EXTENSION = "py"

BATCH_TEMPLATE = """
import numpy as np


def {func_name}_batch(replicas):
    replicas = np.asarray(replicas, dtype=np.float64)
    if replicas.ndim != 1:
        raise ValueError("replica indices must be a 1-dimensional array")
    return np.fromiter(({func_name}(r) for r in replicas), dtype=np.float64, count=len(replicas))
"""


def default_wrapper(code: str, func_name: str, module_name: str) -> tuple[str, str]:
    return code, func_name


def batch_wrapper_numpy(code: str, func_name: str, module_name: str) -> tuple[str, str]:
    return f"{code}\n{BATCH_TEMPLATE.format(func_name=func_name)}", f"{func_name}_batch"
