from dataclasses import asdict, dataclass, replace
from typing import Any, Literal


@dataclass(frozen=True)
class Defaults:
    """Numeric defaults of every solver.

    Each field can be overridden per call through keyword arguments, and from the command line
    through the flag of the same name. The whole record is echoed in CLI output headers.
    """

    nodes: int = 256
    exact_tol: float = 1e-10
    cross_tol: float = 1e-7
    mc_sigmas: float = 4.0
    max_states: int = 200_000
    max_paths: int = 200_000
    max_contour_n: int = 5
    pole_tol: float = 1e-12
    contour_margin: float = 1e-6
    large_radius: float = 2.0
    offset: int = 0
    precision: int = 40
    samples: int = 100_000
    seed: int = 20240607
    backend: Literal["numpy", "python", "cython", "c"] = "numpy"
    chunk: int = 65_536
    quad_tol: float = 1e-8
    max_nodes: int = 2048
    limit_trunc: float = 8.0

    def replace(self, **overrides: Any) -> "Defaults":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def as_dict(self) -> dict[str, Any]:
        return asdict(self)


DEFAULTS = Defaults()
