"""Source fragments shared by the simulation kernels.

Every backend draws from the same counter-based stream: a replica's key is
``mix64(seed + GOLDEN * (replica + 1))`` and its k-th uniform is
``(mix64(key + GOLDEN * (k + 1)) >> 11) * 2^-53``, with ``mix64`` the splitmix64 finaliser.
Step ``s`` of a trajectory uses draws ``2s`` (holding time) and ``2s + 1`` (which particle).
"""

from typing import Sequence

PY_PRELUDE = """
import math

from qtazrp_lab.montecarlo import pick_index, priority_rates, stream_key, stream_uniform
"""

C_HELPERS = """
#include <math.h>
#include <stdint.h>

#define QTZ_GOLDEN 0x9E3779B97F4A7C15ULL

static inline uint64_t qtz_mix64(uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

static inline double qtz_uniform(uint64_t key, uint64_t k) {
    return (double)(qtz_mix64(key + QTZ_GOLDEN * (k + 1)) >> 11) * 1.1102230246251565e-16;
}

static inline double qtz_rates(const long long *pos, const int *species, const double *qpow, double *rates, int n) {
    double lam = 0.0;
    for (int i = 0; i < n; i++) {
        int ahead = 0;
        for (int j = 0; j < n; j++)
            if (j != i && pos[j] == pos[i] && (species[j] < species[i] || (species[j] == species[i] && j < i)))
                ahead++;
        rates[i] = qpow[ahead];
        lam += rates[i];
    }
    return lam;
}

static inline int qtz_pick(const double *rates, int n, double target) {
    double acc = 0.0;
    for (int i = 0; i < n; i++) {
        acc += rates[i];
        if (target < acc)
            return i;
    }
    return n - 1;
}
"""

CYTHON_HELPERS = """
from libc.math cimport log
from libc.stdint cimport uint64_t

cdef uint64_t QTZ_GOLDEN = 0x9E3779B97F4A7C15ULL

cdef inline uint64_t qtz_mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)

cdef inline double qtz_uniform(uint64_t key, uint64_t k) noexcept nogil:
    return <double>(qtz_mix64(key + QTZ_GOLDEN * (k + 1)) >> 11) * 1.1102230246251565e-16

cdef inline double qtz_rates(long long *pos, int *species, double *qpow, double *rates, int n) noexcept nogil:
    cdef double lam = 0.0
    cdef int i, j, ahead
    for i in range(n):
        ahead = 0
        for j in range(n):
            if j != i and pos[j] == pos[i] and (species[j] < species[i] or (species[j] == species[i] and j < i)):
                ahead += 1
        rates[i] = qpow[ahead]
        lam += rates[i]
    return lam

cdef inline int qtz_pick(double *rates, int n, double target) noexcept nogil:
    cdef double acc = 0.0
    cdef int i
    for i in range(n):
        acc += rates[i]
        if target < acc:
            return i
    return n - 1
"""


def c_array(values: Sequence) -> str:
    return "{" + ", ".join(repr(v) for v in values) + "}"


def cython_fill(name: str, values: Sequence, indent: str = "    ") -> str:
    return "\n".join(f"{indent}{name}[{i}] = {v!r}" for i, v in enumerate(values))


def cython_locals(n: int, indent: str = "    ") -> str:
    return "\n".join(
        f"{indent}{decl}"
        for decl in (
            f"cdef long long pos[{n}]",
            f"cdef long long bound[{n}]",
            f"cdef int species[{n}]",
            f"cdef double qpow[{n}]",
            f"cdef double rates[{n}]",
            "cdef int i",
            "cdef uint64_t step = 0",
            "cdef uint64_t key",
            "cdef double lam",
        )
    )
