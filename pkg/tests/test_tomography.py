import numpy as np
import pytest

from vartomo import linalg
from vartomo.channels import (
    ProcessMatrix,
    build_scaled_pauli_basis,
    check_trace_preserving,
    identity_channel,
    kraus_to_chi,
    maximally_entangled_state,
    process_fidelity,
)
from vartomo.probes import (
    EffectSet,
    MeasurementRecord,
    RngSeed,
    Scheme,
    aapt_probe_state,
    random_channel,
)
from vartomo.sdp import SolveStatus, assemble_expectation_row
from vartomo.tomography import (
    InfeasibleDataError,
    ReconstructionOptions,
    TomographyDataset,
    build_aapt_program,
    build_sqpt_program,
    dataset_from_json,
    dataset_to_json,
    make_dataset,
    minimal_elements_sweep,
    reconstruct,
)


def linear_inversion(data: TomographyDataset) -> np.ndarray:
    """Independent reconstruction oracle: least squares on the raw rows."""
    ancilla = data.scheme is Scheme.AAPT
    rows = [
        assemble_expectation_row(
            data.probes.states[r.probe_index].rho,
            data.effects.effects[r.effect_index],
            data.basis,
            ancilla,
        )
        for r in data.records
    ]
    ps = [r.p for r in data.records]
    sol, *_ = np.linalg.lstsq(np.stack(rows), np.array(ps), rcond=None)
    return linalg.mat_hermitian(sol, data.d**2)


class TestSqptProgram:
    def test_identity_channel_complete_data(self):
        basis = build_scaled_pauli_basis(1)
        ident = identity_channel(basis)
        data = make_dataset(ident, Scheme.SQPT, 1)
        # linear-inversion oracle agrees with the ground truth first
        assert np.abs(linear_inversion(data) - ident.chi).max() <= 1e-9
        res = reconstruct(data)
        assert process_fidelity(res.chi_hat, ident) >= 0.999
        assert res.slack_sum <= 1e-6
        assert res.solver.status is SolveStatus.OPTIMAL

    def test_depolarizing_complete_data(self):
        basis = build_scaled_pauli_basis(1)
        chi = np.eye(4, dtype=complex)
        truth = ProcessMatrix(d=2, basis=basis, chi=chi)
        data = make_dataset(truth, Scheme.SQPT, 1)
        res = reconstruct(data)
        assert process_fidelity(res.chi_hat, truth) >= 0.999
        assert np.abs(res.chi_hat.chi - chi).max() <= 1e-4

    def test_probe_without_records_is_allowed(self):
        basis = build_scaled_pauli_basis(1)
        ident = identity_channel(basis)
        data = make_dataset(ident, Scheme.SQPT, 1, selected=[[], [0, 1], [2, 3], [4, 5]])
        problem, layout = build_sqpt_program(data)
        assert problem.n_slack == 6
        res = reconstruct(data)
        assert res.solver.status is SolveStatus.OPTIMAL
        assert len(res.per_probe_trace) == 4
        assert all(t <= 1 + 1e-7 for t in res.per_probe_trace)

    def test_empty_dataset_rejected(self):
        basis = build_scaled_pauli_basis(1)
        ident = identity_channel(basis)
        data = make_dataset(ident, Scheme.SQPT, 1, selected=[[], [], [], []])
        with pytest.raises(ValueError, match="no measurement records"):
            build_sqpt_program(data)

    def test_wrong_scheme_rejected(self):
        basis = build_scaled_pauli_basis(1)
        data = make_dataset(identity_channel(basis), Scheme.AAPT, 1)
        with pytest.raises(ValueError):
            build_sqpt_program(data)


class TestAaptProgram:
    def test_identity_channel_complete_data(self):
        basis = build_scaled_pauli_basis(1)
        ident = identity_channel(basis)
        data = make_dataset(ident, Scheme.AAPT, 1)
        assert np.abs(linear_inversion(data) - ident.chi).max() <= 1e-9
        res = reconstruct(data)
        assert process_fidelity(res.chi_hat, ident) >= 0.999

    def test_single_bell_effect_constraint_satisfied(self):
        # one measured effect: the projector onto the entangled probe, p = 1;
        # any feasible answer must keep the Choi overlap at 1.
        basis = build_scaled_pauli_basis(1)
        ident = identity_channel(basis)
        bell = maximally_entangled_state(2).rho
        effects = EffectSet(
            dim=4,
            effects=np.stack([bell, np.eye(4) - bell]),
            labels=("bell", "rest"),
        )
        data = TomographyDataset(
            scheme=Scheme.AAPT,
            d=2,
            basis=basis,
            probes=aapt_probe_state(1),
            effects=effects,
            records=(MeasurementRecord(probe_index=0, effect_index=0, p=1.0),),
        )
        res = reconstruct(data)
        row = assemble_expectation_row(bell, bell, basis, ancilla=True)
        overlap = row @ linalg.vec_hermitian(res.chi_hat.chi)
        assert overlap == pytest.approx(1.0, abs=1e-5)

    def test_random_rank_one_channel(self):
        basis = build_scaled_pauli_basis(1)
        truth = kraus_to_chi(random_channel(2, 1, RngSeed(808)), basis)
        data = make_dataset(truth, Scheme.AAPT, 1)
        res = reconstruct(data)
        assert process_fidelity(res.chi_hat, truth) >= 0.999

    def test_degenerate_probe_warns(self):
        basis = build_scaled_pauli_basis(1)
        ident = identity_channel(basis)
        complete = make_dataset(ident, Scheme.AAPT, 1)
        ket = np.zeros(4, dtype=complex)
        ket[0] = 1.0
        from vartomo.channels import DensityMatrix
        from vartomo.probes import ProbeSet

        product_probe = ProbeSet(
            d=2,
            states=(DensityMatrix(d=4, rho=np.outer(ket, ket.conj())),),
            scheme=Scheme.AAPT,
        )
        data = TomographyDataset(
            scheme=Scheme.AAPT,
            d=2,
            basis=basis,
            probes=product_probe,
            effects=complete.effects,
            records=complete.records[:4],
        )
        with pytest.warns(UserWarning, match="Schmidt"):
            build_aapt_program(data)


class TestReconstruct:
    def test_noiseless_battery(self):
        basis = build_scaled_pauli_basis(1)
        seed = RngSeed(2001)
        for i, rank in enumerate([1, 2, 3, 4] * 2):
            truth = kraus_to_chi(random_channel(2, rank, seed.derive(i)), basis)
            data = make_dataset(truth, Scheme.SQPT, 1)
            assert np.abs(linear_inversion(data) - truth.chi).max() <= 1e-8
            res = reconstruct(data)
            assert process_fidelity(res.chi_hat, truth) >= 0.999
            assert res.slack_sum <= 1e-6

    def test_noisy_battery(self):
        basis = build_scaled_pauli_basis(1)
        seed = RngSeed(2002)
        fids = []
        for i in range(4):
            truth = kraus_to_chi(random_channel(2, 2, seed.derive("ch", i)), basis)
            data = make_dataset(truth, Scheme.SQPT, 1, shots=10_000, seed=seed.derive("m", i))
            res = reconstruct(data)
            fids.append(process_fidelity(res.chi_hat, truth))
            assert res.slack_sum > 0
        assert np.median(fids) >= 0.95

    def test_post_hoc_envelopes_hold(self):
        basis = build_scaled_pauli_basis(1)
        truth = kraus_to_chi(random_channel(2, 3, RngSeed(2003)), basis)
        data = make_dataset(truth, Scheme.SQPT, 1)
        res = reconstruct(data, ReconstructionOptions(tol=1e-9))
        assert res.max_envelope_violation <= 1e-7

    def test_tp_constraint(self):
        basis = build_scaled_pauli_basis(1)
        truth = kraus_to_chi(random_channel(2, 2, RngSeed(2004)), basis)
        data = make_dataset(truth, Scheme.SQPT, 1)
        res = reconstruct(data, ReconstructionOptions(tp_constraint=True, tol=1e-9))
        _, defect = check_trace_preserving(res.chi_hat)
        assert defect <= 1e-6
        assert process_fidelity(res.chi_hat, truth) >= 0.999

    def test_sqpt_aapt_agreement(self):
        basis = build_scaled_pauli_basis(1)
        truth = kraus_to_chi(random_channel(2, 2, RngSeed(2005)), basis)
        res_s = reconstruct(make_dataset(truth, Scheme.SQPT, 1))
        res_a = reconstruct(make_dataset(truth, Scheme.AAPT, 1))
        assert process_fidelity(res_s.chi_hat, res_a.chi_hat) >= 0.999

    def test_contradictory_records_infeasible(self):
        basis = build_scaled_pauli_basis(1)
        ident = identity_channel(basis)
        data = make_dataset(ident, Scheme.SQPT, 1)
        contradiction = MeasurementRecord(probe_index=0, effect_index=4, p=1.0)
        bad = TomographyDataset(
            scheme=data.scheme,
            d=data.d,
            basis=data.basis,
            probes=data.probes,
            effects=data.effects,
            records=data.records + (contradiction,),
        )
        # strict envelopes: every record through the capped additive branch
        options = ReconstructionOptions(p_min=1.1, additive_scale=1e-3)
        with pytest.raises(InfeasibleDataError) as err:
            reconstruct(bad, options)
        worst_record = err.value.worst_records[0][0]
        assert (worst_record.probe_index, worst_record.effect_index) == (0, 4)

    def test_zero_probability_records_stay_feasible(self):
        basis = build_scaled_pauli_basis(1)
        ident = identity_channel(basis)
        data = make_dataset(ident, Scheme.SQPT, 1)
        assert any(r.p == 0 for r in data.records)
        res = reconstruct(data)
        assert res.solver.status is SolveStatus.OPTIMAL
        assert res.slack_sum <= 1e-6


class TestSweep:
    def test_zero_threshold_stops_immediately(self):
        channel = random_channel(2, 1, RngSeed(3001))
        res = minimal_elements_sweep(channel, Scheme.SQPT, 0.0, trials=1, seed=RngSeed(3002))
        assert res.minimal_independent_count == 1
        assert not res.saturated
        assert len(res.trace) == 1

    def test_rank_one_needs_fewer_than_complete(self):
        channel = random_channel(2, 1, RngSeed(3003))
        res = minimal_elements_sweep(channel, Scheme.SQPT, 0.99, trials=2, seed=RngSeed(3004))
        assert not res.saturated
        assert res.minimal_independent_count < 16  # complete-data count is d^4

    def test_complete_data_endpoint_dominates(self):
        channel = random_channel(2, 2, RngSeed(3005))
        res = minimal_elements_sweep(
            channel, Scheme.SQPT, 0.99999999, trials=1, seed=RngSeed(3006)
        )
        fids = [f for _, f in res.trace]
        assert fids[-1] >= max(fids) - 1e-6

    def test_deterministic(self):
        channel = random_channel(2, 2, RngSeed(3007))
        a = minimal_elements_sweep(channel, Scheme.SQPT, 0.99, trials=1, seed=RngSeed(3008))
        b = minimal_elements_sweep(channel, Scheme.SQPT, 0.99, trials=1, seed=RngSeed(3008))
        assert a.trace == b.trace
        assert a.minimal_independent_count == b.minimal_independent_count

    def test_threshold_validation(self):
        channel = random_channel(2, 1, RngSeed(3009))
        with pytest.raises(ValueError):
            minimal_elements_sweep(channel, Scheme.SQPT, 1.0, trials=1, seed=RngSeed(1))
        with pytest.raises(ValueError):
            minimal_elements_sweep(channel, Scheme.SQPT, 0.9, trials=0, seed=RngSeed(1))


def test_dataset_json_roundtrip():
    basis = build_scaled_pauli_basis(1)
    truth_kraus = random_channel(2, 2, RngSeed(4001))
    truth = kraus_to_chi(truth_kraus, basis)
    data = make_dataset(truth, Scheme.SQPT, 1, shots=100, seed=RngSeed(4002))
    text = dataset_to_json(data, truth=truth_kraus)
    back, back_truth = dataset_from_json(text)
    assert back.scheme is Scheme.SQPT
    assert back.records == data.records
    assert np.abs(back_truth.operators - truth_kraus.operators).max() <= 1e-12
