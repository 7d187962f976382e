from dataclasses import dataclass

from ._streams import C_HELPERS, CYTHON_HELPERS, PY_PRELUDE, c_array, cython_fill, cython_locals


@dataclass(frozen=True)
class HittingQuery:
    """Indicator that the jump chain from ``positions`` visits ``target`` (one particle per species)."""

    positions: tuple[int, ...]
    target: tuple[int, ...]
    q: float
    seed: int

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def species(self) -> tuple[int, ...]:
        return tuple(range(1, self.n + 1))

    @property
    def qpow(self) -> tuple[float, ...]:
        return tuple(self.q**k for k in range(self.n))


TargetQuery = HittingQuery


def generate_kernel_python(query: HittingQuery, func_name: str) -> str:
    return f"""{PY_PRELUDE}

def {func_name}(replica):
    pos = {list(query.positions)!r}
    target = {list(query.target)!r}
    species = {query.species!r}
    qpow = {query.qpow!r}
    if any(p > b for p, b in zip(pos, target)):
        return 0.0
    key = stream_key({query.seed!r}, int(replica))
    step = 0
    while pos != target:
        rates, lam = priority_rates(pos, species, qpow)
        i = pick_index(rates, stream_uniform(key, 2 * step + 1) * lam)
        pos[i] += 1
        if pos[i] > target[i]:
            return 0.0
        step += 1
    return 1.0
"""


def generate_kernel_cython(query: HittingQuery, func_name: str) -> str:
    n = query.n
    return f"""{CYTHON_HELPERS}

cpdef double {func_name}(double replica) noexcept nogil:
{cython_locals(n)}
    cdef int done
{cython_fill("pos", query.positions)}
{cython_fill("bound", query.target)}
{cython_fill("species", query.species)}
{cython_fill("qpow", query.qpow)}
    for i in range({n}):
        if pos[i] > bound[i]:
            return 0.0
    key = qtz_mix64(<uint64_t>{query.seed % 2**64}ULL + QTZ_GOLDEN * (<uint64_t>replica + 1))
    while True:
        done = 1
        for i in range({n}):
            if pos[i] != bound[i]:
                done = 0
                break
        if done:
            return 1.0
        lam = qtz_rates(pos, species, qpow, rates, {n})
        i = qtz_pick(rates, {n}, qtz_uniform(key, 2 * step + 1) * lam)
        pos[i] += 1
        if pos[i] > bound[i]:
            return 0.0
        step += 1
"""


def generate_kernel_c(query: HittingQuery, func_name: str) -> str:
    n = query.n
    return f"""{C_HELPERS}

double {func_name}(double replica) {{
    long long pos[{n}] = {c_array(query.positions)};
    const long long target[{n}] = {c_array(query.target)};
    const int species[{n}] = {c_array(query.species)};
    const double qpow[{n}] = {c_array(query.qpow)};
    double rates[{n}];
    for (int i = 0; i < {n}; i++)
        if (pos[i] > target[i])
            return 0.0;
    uint64_t key = qtz_mix64({query.seed % 2**64}ULL + QTZ_GOLDEN * ((uint64_t)replica + 1));
    for (uint64_t step = 0;; step++) {{
        int done = 1;
        for (int i = 0; i < {n}; i++)
            if (pos[i] != target[i]) {{
                done = 0;
                break;
            }}
        if (done)
            return 1.0;
        double lam = qtz_rates(pos, species, qpow, rates, {n});
        int i = qtz_pick(rates, {n}, qtz_uniform(key, 2 * step + 1) * lam);
        if (++pos[i] > target[i])
            return 0.0;
    }}
}}
"""
