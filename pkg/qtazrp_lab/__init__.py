"""Exact, contour-integral and Monte Carlo solvers for the multi-species q-TAZRP."""

from typing import Callable, Literal

from .backend import get_compiler
from .codegen import get_codegen
from .codegen.cdf_kernel import CdfQuery
from .codegen.hitting_kernel import HittingQuery

__version__ = "0.1.0"


def compile_kernel(
    query: CdfQuery | HittingQuery,
    backend: Literal["python", "c", "cython"],
    module_name: str | None = None,
    batch_mode: Literal["numpy"] | None = None,
    **kwargs,
) -> Callable:
    """Compile the simulation kernel of a query.

    The query's constants (start, bounds, q, t, seed) are baked into the generated source.

    Parameters
    ----------
    query : CdfQuery | HittingQuery
        The indicator to simulate.
    backend : {"python", "c", "cython"}
        The backend used for compilation.
    module_name : str | None
        The name of the module to save the compiled kernel; an unchanged kernel is reused.
    batch_mode : {"numpy"} | None
        With ``"numpy"`` the callable takes a 1-D array of replica indices.
    kwargs : dict
        Additional keyword arguments to pass to the compilation function.

    Returns
    -------
    Callable[..., float]
        Maps a replica index to its outcome 1.0 or 0.0, or an array of indices to an array.
    """
    compiler = get_compiler(backend)
    codegen = get_codegen(query, backend)
    func_name = module_name or f"qtz_{type(query).__name__.lower()}"
    code = codegen(func_name=func_name)
    return compiler(code, func_name=func_name, module_name=module_name, batch_mode=batch_mode, **kwargs)


from .asymptotics import convergence_study, finite_qmoment, limit_density, limit_qmoment  # noqa: E402
from .contour import (  # noqa: E402
    ContourSpec,
    cdf_contour,
    contour_I,
    contour_I_tilde,
    contour_J,
    qmoment_contour,
    transition_prob_contour,
)
from .exact import cdf, duality_qmoment, hitting_prob, path_decomposition_cdf, verify_shift  # noqa: E402
from .montecarlo import SimEstimate, estimate_cdf, estimate_hitting, estimate_qmoment, simulate  # noqa: E402
from .settings import DEFAULTS  # noqa: E402
