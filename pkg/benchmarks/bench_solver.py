"""Benchmark the solver's numba kernel against the pure-numpy fallback.

Run with ``python benchmarks/bench_solver.py``.  The same iteration-loop
source backs both paths (see vartomo/_kernels.py); this script measures
what the JIT actually buys on representative reconstruction problems.
"""

import time

import numpy as np

from vartomo._kernels import admm_loop_numba
from vartomo.channels import build_scaled_pauli_basis, kraus_to_chi
from vartomo.probes import RngSeed, Scheme, random_channel
from vartomo.sdp import SdpProblem, solve
from vartomo.tomography import ReconstructionOptions, build_sqpt_program, make_dataset


def tomography_problem(n_qubits: int, rank: int, shots: int = 0) -> SdpProblem:
    seed = RngSeed(9000 + n_qubits)
    d = 2**n_qubits
    basis = build_scaled_pauli_basis(n_qubits)
    truth = kraus_to_chi(random_channel(d, rank, seed), basis)
    data = make_dataset(
        truth, Scheme.SQPT, n_qubits, shots=shots, seed=seed.derive("m") if shots else None
    )
    problem, _ = build_sqpt_program(data, ReconstructionOptions())
    return problem


def random_diag_sdp(dim: int, n_rows: int) -> SdpProblem:
    rng = np.random.default_rng(41)
    from vartomo.linalg import vec_hermitian

    p = SdpProblem(psd_dim=dim, n_slack=0)
    p.objective = vec_hermitian(np.diag(rng.uniform(0.5, 2.0, size=dim)))
    for _ in range(n_rows):
        k = rng.integers(dim)
        unit = np.zeros((dim, dim))
        unit[k, k] = 1.0
        p.add_inequality(vec_hermitian(unit), rng.uniform(0.1, 1.0), np.inf)
    return p


def time_solve(problem, backend, tol=1e-7, repeats=3):
    best = np.inf
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = solve(problem, tol, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, result


def main():
    cases = [
        ("single-qubit SQPT, noiseless", tomography_problem(1, 2)),
        ("single-qubit SQPT, 1e4 shots", tomography_problem(1, 2, shots=10_000)),
        ("two-qubit SQPT, noiseless", tomography_problem(2, 8)),
        ("random diagonal SDP (dim 8)", random_diag_sdp(8, 24)),
    ]

    have_numba = admm_loop_numba is not None
    if have_numba:
        # trigger JIT compilation outside the timed region
        solve(cases[0][1], 1e-5, backend="numba")
    else:
        print("numba unavailable: timing the numpy path only\n")

    header = f"{'problem':34s} {'numpy':>10s}"
    if have_numba:
        header += f" {'numba':>10s} {'speedup':>8s} {'iters':>7s}"
    print(header)
    print("-" * len(header))
    for name, problem in cases:
        t_np, r_np = time_solve(problem, "numpy")
        line = f"{name:34s} {t_np * 1e3:9.1f}ms"
        if have_numba:
            t_nb, r_nb = time_solve(problem, "numba")
            assert r_nb.status == r_np.status
            line += f" {t_nb * 1e3:9.1f}ms {t_np / t_nb:7.1f}x {r_nb.iterations:7d}"
        print(line)


if __name__ == "__main__":
    main()
