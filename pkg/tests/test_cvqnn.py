import numpy as np
import pytest

from cvqoc import cvqnn, fock


def bank_of(units_per_circuit, cutoff=12):
    circuits = [cvqnn.QnnCircuit(units=u, n_modes=1, cutoff=cutoff)
                for u in units_per_circuit]
    return cvqnn.QnnBank(circuits=circuits)


def test_encode_input_vacuum_at_zero():
    state = cvqnn.encode_input(0.0, 10)
    assert abs(state.amplitudes[0] - 1.0) < 1e-14
    assert np.max(np.abs(state.amplitudes[1:])) < 1e-14


def test_encode_input_coherent_amplitude():
    state = cvqnn.encode_input(0.4, 30)
    assert abs(state.amplitudes[0] - np.exp(-0.08)) < 1e-10


def test_zero_unit_is_identity():
    state = cvqnn.encode_input(0.3, 15)
    out = cvqnn.unit_apply(state, cvqnn.zero_unit())
    assert np.max(np.abs(out.amplitudes - state.amplitudes)) < 1e-12


def test_rotation_only_unit():
    phi = 0.9
    unit = cvqnn.zero_unit()
    unit.rot1 = np.array([phi])
    state = cvqnn.encode_input(0.5, 20)
    out = cvqnn.unit_apply(state, unit)
    expect = fock.apply(fock.gate_matrix(fock.Rotation(phi), 20), state)
    assert np.max(np.abs(out.amplitudes - expect.amplitudes)) < 1e-12


def test_depth_zero_forward_is_scaled_input():
    bank = bank_of([[], []], cutoff=30)
    for tau in (-0.5, 0.0, 0.7):
        sigma = cvqnn.forward(bank, tau)
        assert np.max(np.abs(sigma - np.sqrt(2) * tau)) < 1e-6
    dsig = cvqnn.forward_dtau(bank, 0.2)
    assert np.max(np.abs(dsig - np.sqrt(2))) < 1e-6


def test_displacement_only_feature():
    unit = cvqnn.zero_unit()
    unit.disp = np.array([0.3 + 0j])
    bank = bank_of([[unit]], cutoff=30)
    assert abs(cvqnn.forward(bank, 0.0)[0] - np.sqrt(2) * 0.3) < 1e-6


def test_second_zero_unit_is_noop():
    rng = np.random.default_rng(4)
    base = cvqnn.random_bank(1, 1, 14, rng)
    unit = base.circuits[0].units[0]
    one = bank_of([[unit]], cutoff=14)
    two = bank_of([[unit, cvqnn.zero_unit()]], cutoff=14)
    assert np.allclose(cvqnn.forward(one, 0.4), cvqnn.forward(two, 0.4), atol=1e-12)


def test_norm_preserved():
    rng = np.random.default_rng(0)
    bank = cvqnn.random_bank(3, 2, 30, rng)
    state = cvqnn.encode_input(0.5, 30)
    for circ in bank.circuits:
        out = circ.unitary() @ state.amplitudes
        assert abs(np.linalg.norm(out) - np.linalg.norm(state.amplitudes)) < 1e-6


def test_flat_round_trip_and_version():
    rng = np.random.default_rng(1)
    bank = cvqnn.random_bank(2, 2, 8, rng)
    flat = bank.get_flat()
    v0 = bank.version
    bank.set_flat(flat)
    assert np.array_equal(bank.get_flat(), flat)
    assert all(b == a + 1 for a, b in zip(v0, bank.version))
    with pytest.raises(ValueError):
        bank.set_flat(flat[:-1])


def test_forward_deterministic():
    rng = np.random.default_rng(2)
    bank = cvqnn.random_bank(2, 2, 10, rng)
    a = cvqnn.forward(bank, 0.3)
    b = cvqnn.forward(bank, 0.3)
    assert np.array_equal(a, b)


def test_random_bank_seed_reproducible():
    a = cvqnn.random_bank(3, 2, 10, np.random.default_rng(42)).get_flat()
    b = cvqnn.random_bank(3, 2, 10, np.random.default_rng(42)).get_flat()
    assert np.array_equal(a, b)


def test_forward_dtau_order_of_accuracy():
    rng = np.random.default_rng(5)
    bank = cvqnn.random_bank(2, 2, 12, rng)
    h = 1e-3
    d_h = cvqnn.forward_dtau(bank, 0.2, h)
    d_h2 = cvqnn.forward_dtau(bank, 0.2, h / 2)
    d_h4 = cvqnn.forward_dtau(bank, 0.2, h / 4)
    # error drops ~4x per halving for an O(h^2) scheme
    err_h2 = np.abs(d_h - d_h2)
    err_h4 = np.abs(d_h2 - d_h4)
    assert np.all(err_h4 <= err_h2 / 2.0 + 1e-12)


def test_parameter_continuity():
    rng = np.random.default_rng(6)
    bank = cvqnn.random_bank(1, 2, 12, rng)
    base = cvqnn.forward(bank, 0.3)[0]
    flat = bank.get_flat()
    flat[3] += 1e-6
    bank.set_flat(flat)
    assert abs(cvqnn.forward(bank, 0.3)[0] - base) < 1e-3


def test_unit_shape_validation():
    with pytest.raises(ValueError):
        cvqnn.QnnUnitParams(bs1=np.zeros(0), rot1=np.zeros(1), squeeze=np.zeros(2),
                            bs2=np.zeros(0), rot2=np.zeros(1),
                            disp=np.zeros(1, dtype=complex), kerr=np.zeros(1))


def test_bank_rejects_mixed_cutoff():
    c1 = cvqnn.QnnCircuit(units=[cvqnn.zero_unit()], n_modes=1, cutoff=8)
    c2 = cvqnn.QnnCircuit(units=[cvqnn.zero_unit()], n_modes=1, cutoff=10)
    with pytest.raises(ValueError):
        cvqnn.QnnBank(circuits=[c1, c2])
