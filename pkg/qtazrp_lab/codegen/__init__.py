import importlib
import pkgutil
from functools import partial
from types import ModuleType
from typing import Any, Protocol


class CodeGen(Protocol):
    def __call__(self, func_name: str) -> str: ...


supported: dict[type, ModuleType] = {}
for _, module_name, is_pkg in pkgutil.iter_modules(__path__):
    if not is_pkg and not module_name.startswith("_"):
        module = importlib.import_module(f".{module_name}", package=__name__)
        supported[module.TargetQuery] = module


def get_impl(query_type: type) -> ModuleType:
    if query_type in supported:
        return supported[query_type]
    raise NotImplementedError(f"Query type {query_type.__name__} not supported yet. Supported queries are {[t.__name__ for t in supported]}.")


def get_codegen(query: Any, backend: str) -> CodeGen:
    """Get the kernel generator for a simulation query and backend.

    Parameters
    ----------
    query : CdfQuery | HittingQuery
        The frozen query whose constants are baked into the kernel.
    backend : str
        The backend to generate code for.

    Returns
    -------
    CodeGen
        A function of ``func_name`` returning the kernel source. The kernel maps a replica
        index (passed as a double) to the indicator outcome 1.0 or 0.0.
    """
    impl = get_impl(type(query))
    codegen_impl = getattr(impl, f"generate_kernel_{backend}", None)
    if codegen_impl is None:
        raise NotImplementedError(f"Kernel generation for {type(query).__name__} with backend {backend} is not supported yet.")
    return partial(codegen_impl, query)
