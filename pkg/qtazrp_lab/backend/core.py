import importlib
import importlib.util
import logging
import os.path
import tempfile
from types import ModuleType
from typing import Callable, Optional, Protocol

from ..errors import ResourceError
from . import utils

logger = logging.getLogger(__name__)


def compile_module(
    module_name: str,
    sources: list[str],
    include_dirs: Optional[list[str]] = None,
    extra_compile_args: Optional[list[str]] = None,
    extra_link_args: Optional[list[str]] = None,
    dir_name: str = ".",
    silent: bool = True,
) -> ModuleType:
    """Build ``sources`` into an extension module placed in ``dir_name`` and import it."""
    from setuptools import Extension, setup

    extension = Extension(
        module_name,
        sources=sources,
        include_dirs=include_dirs or [],
        extra_compile_args=extra_compile_args or [],
        extra_link_args=extra_link_args or [],
    )
    try:
        (utils.silent_setup if silent else setup)(
            name=module_name,
            packages=[],
            ext_modules=[extension],
            script_args=["build_ext", "-b", dir_name],
        )
    except SystemExit as exc:
        # setuptools reports compiler failures through SystemExit
        raise ResourceError(f"building {module_name} failed: {exc}") from exc

    return utils.import_module_from_dir(module_name, dir_name)


class CodeWrapper(Protocol):
    def __call__(self, code: str, func_name: str, module_name: str) -> tuple[str, str]: ...


def _require(extension: str) -> None:
    match extension:
        case "pyx":
            if importlib.util.find_spec("Cython") is None:
                raise ImportError("Cython is required for the cython backend")
        case "c":
            if importlib.util.find_spec("setuptools") is None:
                raise ImportError("setuptools is required for the c backend")
        case _:
            raise NotImplementedError(f"Extension '{extension}' is not supported.")


def _compile_temporary(code: str, func_name: str, extension: str, wrapper: CodeWrapper, build: dict, silent: bool) -> tuple[ModuleType, str]:
    with tempfile.NamedTemporaryFile(mode="w", suffix=f".{extension}", delete=False) as f:
        dir_name, module_name, _ = utils.split_path(src_path := f.name)
        code, func_name = wrapper(code, func_name, module_name)
        f.write(code)

    try:
        logger.info("compiling temporary module %s", src_path)
        module = compile_module(module_name=module_name, sources=[src_path], dir_name=dir_name, silent=silent, **build)
        assert (module_path := module.__file__) is not None
        try:
            os.remove(module_path)
        except PermissionError:  # the loaded library stays locked on Windows
            logger.debug("could not remove %s while it is loaded", module_path)
    finally:
        os.remove(src_path)
    return module, func_name


def _compile_named(code: str, func_name: str, module_name: str, extension: str, wrapper: CodeWrapper, build: dict, silent: bool) -> tuple[ModuleType, str]:
    src_path = f"{module_name}.{extension}"
    code, func_name = wrapper(code, func_name, module_name)

    if os.path.exists(src_path):
        with open(src_path, "r") as f:
            unchanged = f.read() == code
        if unchanged:
            try:
                module = importlib.import_module(module_name)
                logger.debug("reusing compiled module %s", module_name)
                return module, func_name
            except ImportError:
                logger.info("cached source %s has no importable module, rebuilding", src_path)

    with open(src_path, "w") as f:
        f.write(code)
    logger.info("compiling module %s", module_name)
    return compile_module(module_name=module_name, sources=[src_path], dir_name=".", silent=silent, **build), func_name


def compile_function(
    code: str,
    func_name: str,
    extension: str,
    wrapper: CodeWrapper,
    module_name: str | None = None,
    include_dirs: Optional[list[str]] = None,
    extra_compile_args: Optional[list[str]] = None,
    extra_link_args: Optional[list[str]] = None,
    silent: bool = True,
) -> Callable:
    """Turn kernel source into a callable.

    Python sources are executed in a fresh namespace. Cython and C sources are written next to
    ``module_name`` (kept and reused while the generated code is unchanged) or, without a module
    name, to a temporary file that is removed once the extension is loaded.
    """
    if extension == "py":
        code, func_name = wrapper(code, func_name, module_name or "")
        exec(code, namespace := {})
        return namespace[func_name]

    _require(extension)
    build = {"include_dirs": include_dirs, "extra_compile_args": extra_compile_args, "extra_link_args": extra_link_args}
    if module_name is None:
        module, func_name = _compile_temporary(code, func_name, extension, wrapper, build, silent)
    else:
        module, func_name = _compile_named(code, func_name, module_name, extension, wrapper, build, silent)
    return getattr(module, func_name)
