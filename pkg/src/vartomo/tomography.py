"""The two variational estimators and the minimal-measurement sweep.

Both programs share one structure: minimize the reconstructed weight on
the unmeasured subspace plus the total noise slack,

    sum_k Tr(out_k H_k) + sum D

subject to chi PSD, Tr(out_k) <= 1, D >= 0, and a two-sided noise
envelope around every measured probability.  H_k is the sum of the
effects NOT measured on probe k.  The standard scheme (SQPT) probes the
channel with d^2 independent states; the ancilla-assisted scheme (AAPT)
sends half of a maximally entangled pair through it and measures
jointly.
"""

from __future__ import annotations

import statistics
import warnings
from dataclasses import dataclass

import numpy as np

from . import linalg
from .channels import (
    KrausSet,
    OperatorBasis,
    ProcessMatrix,
    build_scaled_pauli_basis,
    kraus_to_chi,
    process_fidelity,
)
from .probes import (
    EffectSet,
    MeasurementRecord,
    ProbeSet,
    RngSeed,
    Scheme,
    aapt_probe_state,
    pauli_projector_effects,
    simulate_measurements,
    sqpt_probe_states,
    unknown_subspace_hamiltonian,
)
from .sdp import (
    SdpProblem,
    SdpSolution,
    SolveStatus,
    add_noise_envelope,
    assemble_objective,
    expectation_coefficient_matrix,
    lifted_basis,
    solve,
)


@dataclass(frozen=True)
class TomographyDataset:
    scheme: Scheme
    d: int
    basis: OperatorBasis
    probes: ProbeSet
    effects: EffectSet
    records: tuple[MeasurementRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for r in self.records:
            if not 0 <= r.probe_index < len(self.probes.states):
                raise ValueError(f"record references unknown probe {r.probe_index}")
            if not 0 <= r.effect_index < len(self.effects):
                raise ValueError(f"record references unknown effect {r.effect_index}")

    @property
    def k_t(self) -> int:
        return len(self.probes.states)

    @property
    def n_k(self) -> list[int]:
        counts = [0] * self.k_t
        for r in self.records:
            counts[r.probe_index] += 1
        return counts


@dataclass
class ReconstructionOptions:
    tp_constraint: bool = False
    tol: float = 1e-7
    max_iter: int = 200_000
    p_min: float = 1e-6
    additive_scale: float | None = None
    additive_cap: float = 100.0
    backend: str | None = None
    detect_infeasible: bool = True


@dataclass(frozen=True)
class EnvelopeInfo:
    """What was installed for one record, for post-hoc re-verification."""

    record: MeasurementRecord
    row: np.ndarray  # chi-part coefficients
    slack_index: int
    scale: float  # p for the relative branch, the additive scale otherwise

    def violation(self, chi_vec: np.ndarray, slacks: np.ndarray) -> float:
        value = float(self.row @ chi_vec)
        width = slacks[self.slack_index] * self.scale
        return max(0.0, self.record.p - width - value, value - self.record.p - width)


@dataclass(frozen=True)
class ProgramLayout:
    slack_index: dict[tuple[int, int], int]
    envelopes: tuple[EnvelopeInfo, ...]
    probe_trace_rows: np.ndarray  # (k_t, psd_dim^2)


@dataclass(frozen=True)
class ReconstructionResult:
    chi_hat: ProcessMatrix
    slack_sum: float
    per_probe_trace: tuple[float, ...]
    solver: SdpSolution
    max_envelope_violation: float


class InfeasibleDataError(RuntimeError):
    """The measurement records admit no process matrix.

    Carries the records ranked by how badly the best iterate violates
    their envelopes.
    """

    def __init__(self, solution: SdpSolution, worst: list[tuple[MeasurementRecord, float]]):
        self.solution = solution
        self.worst_records = worst
        head = ", ".join(f"(k={r.probe_index},lam={r.effect_index}):{v:.3g}" for r, v in worst[:3])
        super().__init__(f"records are mutually inconsistent; worst envelope violations: {head}")


def _measurement_rows(
    rho: np.ndarray, effects: np.ndarray, basis: OperatorBasis, ancilla: bool
) -> np.ndarray:
    """Expectation rows for a stack of effects against one probe state."""
    B = lifted_basis(basis) if ancilla else basis.elements
    T = np.einsum("iab,bc->iac", B, rho)
    M = np.einsum("lab,ibc,jac->lij", effects, T, B.conj(), optimize=True)
    K = M.conj()
    K = 0.5 * (K + K.conj().transpose(0, 2, 1))
    return linalg.vec_hermitian_stack(K)


def _trace_preserving_rows(basis: OperatorBasis) -> tuple[np.ndarray, np.ndarray]:
    """Rows pinning sum_ij chi_ij E_j^dag E_i to the identity."""
    els = basis.elements
    G = np.einsum("jba,ibc->ijac", els.conj(), els)  # (i, j) -> E_j^dag E_i
    D = basis.size
    rows = np.empty((basis.d**2, D**2))
    for q in range(D**2):
        unit = np.zeros(D**2)
        unit[q] = 1.0
        chi_q = linalg.mat_hermitian(unit, D)
        S_q = np.einsum("ij,ijac->ac", chi_q, G)
        rows[:, q] = linalg.vec_hermitian(S_q)
    targets = linalg.vec_hermitian(np.eye(basis.d))
    return rows, targets


def _build_program(
    data: TomographyDataset, options: ReconstructionOptions
) -> tuple[SdpProblem, ProgramLayout]:
    if not data.records:
        raise ValueError("dataset has no measurement records: nothing to fit")
    ancilla = data.scheme is Scheme.AAPT
    psd_dim = data.d**2

    slack_index: dict[tuple[int, int], int] = {}
    for r in data.records:
        slack_index.setdefault((r.probe_index, r.effect_index), len(slack_index))
    problem = SdpProblem(psd_dim=psd_dim, n_slack=len(slack_index))

    # Objective: unmeasured-subspace weight per probe plus the slack total.
    terms: list[tuple[np.ndarray | None, np.ndarray | None]] = [
        (None, np.ones(problem.n_slack))
    ]
    measured_by_probe: dict[int, list[int]] = {k: [] for k in range(data.k_t)}
    for k, lam in slack_index:
        measured_by_probe[k].append(lam)
    for k in range(data.k_t):
        H = unknown_subspace_hamiltonian(data.effects, measured_by_probe[k])
        K = expectation_coefficient_matrix(data.probes.states[k].rho, H, data.basis, ancilla)
        terms.append((K, None))
    problem.objective = assemble_objective(terms, psd_dim, problem.n_slack)

    # One expectation row per distinct (probe, effect); envelopes per record.
    space_dim = data.d**2 if ancilla else data.d
    row_cache: dict[int, np.ndarray] = {}
    for k in range(data.k_t):
        lams = sorted(measured_by_probe[k])
        if lams:
            rows = _measurement_rows(
                data.probes.states[k].rho, data.effects.effects[lams], data.basis, ancilla
            )
            row_cache.update({(k, lam): rows[i] for i, lam in enumerate(lams)})
    envelopes = []
    for r in data.records:
        row = row_cache[(r.probe_index, r.effect_index)]
        idx = slack_index[(r.probe_index, r.effect_index)]
        add_noise_envelope(
            problem,
            row,
            r.p,
            idx,
            shots=r.shots,
            p_min=options.p_min,
            additive_scale=options.additive_scale,
            additive_cap=options.additive_cap,
        )
        if r.p >= options.p_min:
            scale = r.p
        else:
            scale = (
                options.additive_scale
                if options.additive_scale is not None
                else (1.0 / r.shots if r.shots > 0 else 1e-3)
            )
        envelopes.append(EnvelopeInfo(record=r, row=row, slack_index=idx, scale=scale))

    # Tr(out_k) <= 1 for every probe, measured or not.
    eye = np.eye(space_dim, dtype=complex)
    trace_rows = np.stack(
        [
            _measurement_rows(state.rho, eye[None], data.basis, ancilla)[0]
            for state in data.probes.states
        ]
    )
    for row in trace_rows:
        problem.add_inequality(problem.chi_row(row), -np.inf, 1.0)

    if options.tp_constraint:
        tp_rows, targets = _trace_preserving_rows(data.basis)
        for row, target in zip(tp_rows, targets):
            problem.add_equality(problem.chi_row(row), float(target))

    layout = ProgramLayout(
        slack_index=slack_index,
        envelopes=tuple(envelopes),
        probe_trace_rows=trace_rows,
    )
    return problem, layout


def build_sqpt_program(
    data: TomographyDataset, options: ReconstructionOptions | None = None
) -> tuple[SdpProblem, ProgramLayout]:
    if data.scheme is not Scheme.SQPT:
        raise ValueError("dataset is not an SQPT dataset")
    return _build_program(data, options or ReconstructionOptions())


def build_aapt_program(
    data: TomographyDataset, options: ReconstructionOptions | None = None
) -> tuple[SdpProblem, ProgramLayout]:
    if data.scheme is not Scheme.AAPT:
        raise ValueError("dataset is not an AAPT dataset")
    probe = data.probes.states[0]
    reduced = probe.rho.reshape(data.d, data.d, data.d, data.d)
    schmidt = np.linalg.matrix_rank(np.trace(reduced, axis1=1, axis2=3), tol=1e-10)
    if schmidt < data.d:
        warnings.warn(
            "AAPT probe does not have full Schmidt rank; the reconstruction "
            "is not unique",
            stacklevel=2,
        )
    return _build_program(data, options or ReconstructionOptions())


def reconstruct(
    data: TomographyDataset, options: ReconstructionOptions | None = None
) -> ReconstructionResult:
    """Build the scheme's program, solve it, and package the result.

    Raises InfeasibleDataError when the solver certifies (heuristically)
    that the records are mutually inconsistent; the error carries the
    records ranked by envelope violation.
    """
    options = options or ReconstructionOptions()
    builder = build_sqpt_program if data.scheme is Scheme.SQPT else build_aapt_program
    problem, layout = builder(data, options)
    solution = solve(
        problem,
        options.tol,
        options.max_iter,
        backend=options.backend,
        detect_infeasible=options.detect_infeasible,
    )
    chi_vec = linalg.vec_hermitian(solution.chi_block)
    if solution.status is SolveStatus.INFEASIBLE:
        scored = sorted(
            ((env.record, env.violation(chi_vec, solution.slacks)) for env in layout.envelopes),
            key=lambda pair: -pair[1],
        )
        raise InfeasibleDataError(solution, scored)

    chi = linalg.psd_project(solution.chi_block)
    chi_hat = ProcessMatrix(d=data.d, basis=data.basis, chi=chi)
    chi_vec = linalg.vec_hermitian(chi)
    violations = [env.violation(chi_vec, solution.slacks) for env in layout.envelopes]
    traces = layout.probe_trace_rows @ chi_vec
    return ReconstructionResult(
        chi_hat=chi_hat,
        slack_sum=float(solution.slacks.sum()),
        per_probe_trace=tuple(float(t) for t in traces),
        solver=solution,
        max_envelope_violation=float(max(violations)),
    )


# --- dataset construction helpers ----------------------------------------------


def default_setup(scheme: Scheme, n_qubits: int) -> tuple[OperatorBasis, ProbeSet, EffectSet]:
    """Canonical basis, probes, and effects for a scheme at a given size."""
    basis = build_scaled_pauli_basis(n_qubits)
    if scheme is Scheme.SQPT:
        return basis, sqpt_probe_states(n_qubits), pauli_projector_effects(n_qubits)
    return basis, aapt_probe_state(n_qubits), pauli_projector_effects(2 * n_qubits)


def complete_selection(probes: ProbeSet, effects: EffectSet) -> list[list[int]]:
    return [list(range(len(effects))) for _ in probes.states]


def make_dataset(
    process: ProcessMatrix,
    scheme: Scheme,
    n_qubits: int,
    selected: list[list[int]] | None = None,
    shots: int = 0,
    seed: RngSeed | None = None,
) -> TomographyDataset:
    """Simulate a dataset for a known process with the canonical setup."""
    basis, probe_set, effect_set = default_setup(scheme, n_qubits)
    if selected is None:
        selected = complete_selection(probe_set, effect_set)
    records = simulate_measurements(process, probe_set, effect_set, selected, shots, seed)
    return TomographyDataset(
        scheme=scheme,
        d=process.d,
        basis=basis,
        probes=probe_set,
        effects=effect_set,
        records=tuple(records),
    )


def dataset_to_json(data: TomographyDataset, truth: KrausSet | None = None) -> str:
    """Portable dataset document: records plus the canonical-setup key.

    Schema: {"scheme": "sqpt"|"aapt", "n_qubits": int,
    "records": [{"k", "lambda", "p", "shots"}, ...], "truth": optional
    channel document as written by the gen-channel command}.
    """
    import json

    from .channels import kraus_to_json

    doc = {
        "scheme": data.scheme.value,
        "n_qubits": data.d.bit_length() - 1,
        "records": [
            {"k": r.probe_index, "lambda": r.effect_index, "p": r.p, "shots": r.shots}
            for r in data.records
        ],
    }
    if truth is not None:
        doc["truth"] = json.loads(kraus_to_json(truth))
    return json.dumps(doc)


def dataset_from_json(text: str) -> tuple[TomographyDataset, KrausSet | None]:
    import json

    from .channels import kraus_from_json

    doc = json.loads(text)
    scheme = Scheme(doc["scheme"])
    n_qubits = int(doc["n_qubits"])
    basis, probe_set, effect_set = default_setup(scheme, n_qubits)
    records = tuple(
        MeasurementRecord(
            probe_index=int(r["k"]),
            effect_index=int(r["lambda"]),
            p=float(r["p"]),
            shots=int(r.get("shots", 0)),
        )
        for r in doc["records"]
    )
    data = TomographyDataset(
        scheme=scheme,
        d=2**n_qubits,
        basis=basis,
        probes=probe_set,
        effects=effect_set,
        records=records,
    )
    truth = kraus_from_json(json.dumps(doc["truth"])) if "truth" in doc else None
    return data, truth


# --- minimal-measurement sweep ---------------------------------------------------


class _IncrementalRank:
    """Rank of a growing set of vectors via Gram-Schmidt against a kept basis."""

    def __init__(self, dim: int, rel_tol: float = 1e-9):
        self.basis: list[np.ndarray] = []
        self.rel_tol = rel_tol

    def add(self, v: np.ndarray) -> int:
        norm = np.linalg.norm(v)
        if norm > 0:
            r = v.astype(float)
            for b in self.basis:
                r = r - (b @ r) * b
            # second pass stabilizes near-dependent vectors
            for b in self.basis:
                r = r - (b @ r) * b
            res = np.linalg.norm(r)
            if res > self.rel_tol * norm:
                self.basis.append(r / res)
        return len(self.basis)

    @property
    def rank(self) -> int:
        return len(self.basis)


@dataclass(frozen=True)
class SweepTrial:
    minimal_count: int
    saturated: bool
    trace: tuple[tuple[int, float], ...]
    solver_iterations: int
    final_chi: ProcessMatrix


@dataclass(frozen=True)
class SweepResult:
    minimal_independent_count: int
    saturated: bool
    trials: tuple[SweepTrial, ...]

    @property
    def trace(self) -> tuple[tuple[int, float], ...]:
        return self.trials[-1].trace

    @property
    def final_fidelity(self) -> float:
        return self.trials[-1].trace[-1][1]

    @property
    def solver_iterations(self) -> int:
        return sum(t.solver_iterations for t in self.trials)


def minimal_elements_sweep(
    channel: KrausSet,
    scheme: Scheme,
    fidelity_threshold: float,
    trials: int,
    seed: RngSeed,
    *,
    shots: int = 0,
    batch: int = 1,
    options: ReconstructionOptions | None = None,
) -> SweepResult:
    """Measurements needed before the reconstruction reaches a fidelity target.

    Each trial reveals the (probe, effect) pairs in a fresh random
    order, ``batch`` at a time, reconstructing after every addition and
    tracking the number of independent elements (the rank of the
    selected expectation rows, aggregated across probes).  The trial
    stops at the first count whose fidelity reaches the threshold; a
    trial that exhausts every pair without reaching it reports the
    saturation count and is flagged.  The headline number is the median
    over trials.
    """
    if not 0 <= fidelity_threshold < 1:
        raise ValueError("fidelity threshold must be in [0, 1)")
    if trials < 1:
        raise ValueError("need at least one trial")
    n_qubits = channel.d.bit_length() - 1
    options = options or ReconstructionOptions()
    basis, probe_set, effect_set = default_setup(scheme, n_qubits)
    truth = kraus_to_chi(channel, basis)
    ancilla = scheme is Scheme.AAPT

    pairs = [
        (k, lam) for k in range(len(probe_set.states)) for lam in range(len(effect_set))
    ]
    all_records = {
        (r.probe_index, r.effect_index): r
        for r in simulate_measurements(
            truth,
            probe_set,
            effect_set,
            complete_selection(probe_set, effect_set),
            shots,
            seed.derive("measure") if shots > 0 else None,
        )
    }

    trial_results = []
    for t in range(trials):
        order = seed.derive("order", t).generator().permutation(len(pairs))
        tracker = _IncrementalRank(basis.size**2)
        records: list[MeasurementRecord] = []
        trace: list[tuple[int, float]] = []
        iterations = 0
        minimal = None
        last_chi = None
        position = 0
        while position < len(order):
            take = order[position : position + batch]
            position += len(take)
            for idx in take:
                k, lam = pairs[idx]
                records.append(all_records[(k, lam)])
                row = _measurement_rows(
                    probe_set.states[k].rho, effect_set.effects[lam : lam + 1], basis, ancilla
                )[0]
                tracker.add(row)
            data = TomographyDataset(
                scheme=scheme,
                d=channel.d,
                basis=basis,
                probes=probe_set,
                effects=effect_set,
                records=tuple(records),
            )
            result = reconstruct(data, options)
            iterations += result.solver.iterations
            last_chi = result.chi_hat
            # A near-zero chi is a valid optimum of a barely-constrained
            # program ("no channel seen"); it scores zero, not an error.
            if result.chi_hat.chi.trace().real < 1e-9:
                fidelity = 0.0
            else:
                fidelity = process_fidelity(result.chi_hat, truth)
            trace.append((tracker.rank, fidelity))
            if fidelity >= fidelity_threshold:
                minimal = tracker.rank
                break
        saturated = minimal is None
        trial_results.append(
            SweepTrial(
                minimal_count=tracker.rank if saturated else minimal,
                saturated=saturated,
                trace=tuple(trace),
                solver_iterations=iterations,
                final_chi=last_chi,
            )
        )

    counts = [t.minimal_count for t in trial_results]
    return SweepResult(
        minimal_independent_count=int(round(statistics.median(counts))),
        saturated=any(t.saturated for t in trial_results),
        trials=tuple(trial_results),
    )
