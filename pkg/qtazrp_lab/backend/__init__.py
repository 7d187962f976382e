import importlib
import importlib.util
import logging
import pkgutil
import re
import shutil
from types import ModuleType
from typing import Callable, Protocol

from ..errors import DomainError
from . import core

logger = logging.getLogger(__name__)


class BackendCompiler(Protocol):
    def __call__(self, code: str, func_name: str, module_name: str | None = None, batch_mode: str | None = None, silent: bool = True, **kwargs) -> Callable: ...


supported: dict[str, ModuleType] = {}
for _, module_name, is_pkg in pkgutil.iter_modules(__path__):
    if m := re.match(r"(.*)_compiler$", module_name):
        supported[m.group(1)] = importlib.import_module(f".{module_name}", package=__name__)


def available(backend: str) -> bool:
    """Whether ``backend`` can compile on this machine (packages and a C compiler present)."""
    if backend == "python":
        return True
    if backend not in supported or importlib.util.find_spec("setuptools") is None:
        return False
    if backend == "cython" and importlib.util.find_spec("Cython") is None:
        return False
    return any(shutil.which(cc) for cc in ("cc", "gcc", "clang", "cl"))


def _default_compiler() -> str:
    from setuptools._distutils.ccompiler import get_default_compiler

    return get_default_compiler()


def get_extra_compile_args(batch_mode: str | None) -> list[str]:
    match _default_compiler():
        case "msvc":
            return ["/O2", "/GL"] + (["/openmp"] if batch_mode is not None else [])
        case "unix":
            # no fast-math: kernels compare floating-point times against t
            return ["-O3"] + (["-fopenmp"] if batch_mode is not None else [])
        case compiler:
            raise NotImplementedError(f"Compiler '{compiler}' is not supported.")


def get_extra_link_args(batch_mode: str | None) -> list[str]:
    if _default_compiler() == "unix" and batch_mode is not None:
        return ["-fopenmp"]
    return []


def get_compiler(backend: str) -> BackendCompiler:
    """Compiler for a discovered ``*_compiler`` backend.

    With ``batch_mode="numpy"`` the compiled callable maps a 1-D float64 array of replica indices
    to the array of outcomes.
    """
    if backend not in supported:
        raise DomainError(f"Backend {backend} not supported. Supported backends are: {list(supported)}")
    module = supported[backend]

    def compile(code: str, func_name: str, module_name: str | None = None, batch_mode: str | None = None, silent: bool = True, **kwargs) -> Callable:
        if batch_mode not in (None, "numpy"):
            raise DomainError(f"batch mode {batch_mode!r} is not supported")
        wrapper = module.default_wrapper if batch_mode is None else module.batch_wrapper_numpy
        native = module.EXTENSION != "py"
        include_dirs = []
        if native and batch_mode == "numpy":
            import numpy as np

            include_dirs = [np.get_include()]
        logger.debug("compiling %s kernel %s (batch_mode=%s)", backend, func_name, batch_mode)
        return core.compile_function(
            code=code,
            func_name=func_name,
            module_name=module_name,
            extension=module.EXTENSION,
            include_dirs=include_dirs,
            extra_compile_args=get_extra_compile_args(batch_mode) if native else [],
            extra_link_args=get_extra_link_args(batch_mode) if native else [],
            wrapper=wrapper,
            silent=silent,
            **kwargs,
        )

    return compile
