from dataclasses import dataclass

from ._streams import C_HELPERS, CYTHON_HELPERS, PY_PRELUDE, c_array, cython_fill, cython_locals


@dataclass(frozen=True)
class CdfQuery:
    """Indicator that every particle is still at or below its bound at time ``t``.

    Particle ``i`` starts at ``positions[i]`` with species ``species[i]``; particles sharing a site
    are served in ``(species, index)`` order. ``bounds[i]`` is the largest allowed site.
    """

    positions: tuple[int, ...]
    species: tuple[int, ...]
    bounds: tuple[int, ...]
    t: float
    q: float
    seed: int

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def qpow(self) -> tuple[float, ...]:
        return tuple(self.q**k for k in range(self.n))


TargetQuery = CdfQuery


def generate_kernel_python(query: CdfQuery, func_name: str) -> str:
    return f"""{PY_PRELUDE}

def {func_name}(replica):
    pos = {list(query.positions)!r}
    bound = {query.bounds!r}
    species = {query.species!r}
    qpow = {query.qpow!r}
    if any(p > b for p, b in zip(pos, bound)):
        return 0.0
    key = stream_key({query.seed!r}, int(replica))
    time = 0.0
    step = 0
    while True:
        rates, lam = priority_rates(pos, species, qpow)
        time += -math.log(1.0 - stream_uniform(key, 2 * step)) / lam
        if time > {query.t!r}:
            return 1.0
        i = pick_index(rates, stream_uniform(key, 2 * step + 1) * lam)
        pos[i] += 1
        if pos[i] > bound[i]:
            return 0.0
        step += 1
"""


def generate_kernel_cython(query: CdfQuery, func_name: str) -> str:
    n = query.n
    return f"""{CYTHON_HELPERS}

cpdef double {func_name}(double replica) noexcept nogil:
{cython_locals(n)}
    cdef double time = 0.0
{cython_fill("pos", query.positions)}
{cython_fill("bound", query.bounds)}
{cython_fill("species", query.species)}
{cython_fill("qpow", query.qpow)}
    for i in range({n}):
        if pos[i] > bound[i]:
            return 0.0
    key = qtz_mix64(<uint64_t>{query.seed % 2**64}ULL + QTZ_GOLDEN * (<uint64_t>replica + 1))
    while True:
        lam = qtz_rates(pos, species, qpow, rates, {n})
        time += -log(1.0 - qtz_uniform(key, 2 * step)) / lam
        if time > {query.t!r}:
            return 1.0
        i = qtz_pick(rates, {n}, qtz_uniform(key, 2 * step + 1) * lam)
        pos[i] += 1
        if pos[i] > bound[i]:
            return 0.0
        step += 1
"""


def generate_kernel_c(query: CdfQuery, func_name: str) -> str:
    n = query.n
    return f"""{C_HELPERS}

double {func_name}(double replica) {{
    long long pos[{n}] = {c_array(query.positions)};
    const long long bound[{n}] = {c_array(query.bounds)};
    const int species[{n}] = {c_array(query.species)};
    const double qpow[{n}] = {c_array(query.qpow)};
    double rates[{n}];
    double time = 0.0;
    for (int i = 0; i < {n}; i++)
        if (pos[i] > bound[i])
            return 0.0;
    uint64_t key = qtz_mix64({query.seed % 2**64}ULL + QTZ_GOLDEN * ((uint64_t)replica + 1));
    for (uint64_t step = 0;; step++) {{
        double lam = qtz_rates(pos, species, qpow, rates, {n});
        time += -log(1.0 - qtz_uniform(key, 2 * step)) / lam;
        if (time > {query.t!r})
            return 1.0;
        int i = qtz_pick(rates, {n}, qtz_uniform(key, 2 * step + 1) * lam);
        if (++pos[i] > bound[i])
            return 0.0;
    }}
}}
"""
