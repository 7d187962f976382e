import importlib.machinery
import importlib.util
import os.path
import re
from contextlib import redirect_stderr, redirect_stdout
from importlib.abc import MetaPathFinder
from types import ModuleType


def split_path(src_path: str) -> tuple[str, str, str]:
    """``/tmp/abc.pyx`` -> ``("/tmp", "abc", ".pyx")``."""
    dir_name, file_name = os.path.split(src_path)
    module_name, ext = os.path.splitext(file_name)
    return dir_name, module_name, ext


def import_module_from_dir(module_name: str, directory: str = ".", finder: MetaPathFinder = importlib.machinery.PathFinder()) -> ModuleType:
    spec = finder.find_spec(module_name, [directory])
    if spec is None or spec.loader is None:
        raise ImportError(f"no module {module_name} in {directory}")
    module = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(module)
    return module


def count_params(code: str, func_name: str, return_type: str = "double", param_type: str = "double") -> int:
    """Number of ``param_type`` parameters in the C or Cython definition of ``func_name``."""
    m = re.search(rf"\b{return_type}\b\s+\b{func_name}\s*\(([^)]*)\)", code)
    if m is None:
        raise ValueError(f"no definition '{return_type} {func_name}(...)' in generated code")
    return len(re.findall(rf"\b{param_type}\b", m.group(1)))


def silent_setup(**kwargs) -> None:
    from setuptools import setup

    # MSVC writes to the console directly, so its output may still show
    with open(os.devnull, "w") as null, redirect_stdout(null), redirect_stderr(null):
        setup(**kwargs)
