import os
import sys
import time
from typing import Callable

import numpy as np

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
import qtazrp_lab as qz
from qtazrp_lab.codegen.cdf_kernel import CdfQuery
from qtazrp_lab.montecarlo import _numpy_outcomes

QUERY = CdfQuery(positions=(0, 0, 0), species=(1, 2, 3), bounds=(0, 1, 3), t=2.0, q=0.6, seed=42)


def compile_backends(query, backends: tuple = ("python", "cython", "c"), is_batch: bool = False) -> dict[str, Callable]:
    compiled: dict[str, Callable] = {}
    for backend in backends:
        try:
            compiled[backend] = qz.compile_kernel(query, backend, batch_mode="numpy" if is_batch else None)
            print(f"✓ Compiled {backend} kernel{' (batch)' if is_batch else ''}")
        except Exception as e:
            print(f"✗ Failed to compile {backend} kernel: {e}")
    return compiled


def validate_replicas(funcs: dict[str, Callable], replicas: np.ndarray) -> bool:
    reference = _numpy_outcomes(QUERY, replicas)
    print(f"\nValidating {len(replicas):,} replicas against the numpy engine (mean {reference.mean():.5f})")
    all_correct = True
    for backend, func in funcs.items():
        try:
            result = np.asarray(func(replicas))
            mismatches = int(np.sum(result != reference))
            # numpy and libm logarithms may differ in the last bit on rare draws
            ok = mismatches <= 2
            all_correct &= ok
            print(f"{'✓' if ok else '✗'} {backend.capitalize():>7}: {mismatches} mismatching replicas")
        except Exception as e:
            print(f"✗ {backend.capitalize()} failed: {e}")
            all_correct = False
    return all_correct


def benchmark(funcs: dict[str, Callable], replicas: np.ndarray) -> dict[str, float]:
    print(f"\nBatch Performance Benchmark ({len(replicas):,} replicas)")
    print("-" * 50)
    results = {}

    start = time.perf_counter()
    _numpy_outcomes(QUERY, replicas)
    numpy_time = results["numpy"] = time.perf_counter() - start
    print(f"   NumPy: {numpy_time:.4f}s ({len(replicas) / numpy_time:,.0f} replicas/sec)")

    for backend, func in funcs.items():
        try:
            start = time.perf_counter()
            func(replicas)
            elapsed = results[backend] = time.perf_counter() - start
            print(f"{backend.capitalize():>7}: {elapsed:.4f}s ({len(replicas) / elapsed:,.0f} replicas/sec, {numpy_time / elapsed:.2f}x vs NumPy)")
        except Exception as e:
            print(f"{backend.capitalize():>7}: Failed - {e}")
            results[backend] = float("inf")
    return results


print("=" * 70)
print("SIMULATION KERNEL BACKENDS")
print("=" * 70)

batch_funcs = compile_backends(QUERY, is_batch=True)
if batch_funcs:
    for size in (1_000, 100_000, 1_000_000):
        print(f"\n--- {size:,} replicas ---")
        replicas = np.arange(size, dtype=np.float64)
        if validate_replicas({k: v for k, v in batch_funcs.items() if k != "python" or size <= 100_000}, replicas):
            benchmark({k: v for k, v in batch_funcs.items() if k != "python" or size <= 100_000}, replicas)
