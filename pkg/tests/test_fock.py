import numpy as np
import pytest

from cvqoc import fock


def test_ladder_matrix_elements():
    a, adag = fock.ladder(4)
    expect = np.zeros((4, 4))
    for n in range(1, 4):
        expect[n - 1, n] = np.sqrt(n)
    assert np.allclose(a.entries, expect)
    assert np.allclose(adag.entries, expect.T)
    # number operator a†a = diag(0..3)
    assert np.allclose(adag.entries @ a.entries, np.diag([0.0, 1.0, 2.0, 3.0]))


@pytest.mark.parametrize("kappa", [0.1, 1.0])
def test_kerr_diagonal(kappa):
    mat = fock.gate_matrix(fock.Kerr(kappa), 20).entries
    ns = np.arange(20)
    assert np.max(np.abs(np.diag(mat) - np.exp(1j * kappa * ns**2))) < 1e-12
    assert np.max(np.abs(mat - np.diag(np.diag(mat)))) == 0.0


def test_rotation_diagonal():
    mat = fock.gate_matrix(fock.Rotation(0.7), 8).entries
    assert np.allclose(np.diag(mat), np.exp(1j * 0.7 * np.arange(8)), atol=1e-12)


def test_diagonal_gates_exactly_unitary():
    for gate in (fock.Rotation(1.3), fock.Kerr(0.4)):
        u = fock.gate_matrix(gate, 15).entries
        assert np.max(np.abs(u.conj().T @ u - np.eye(15))) < 1e-12


def test_displacement_vacuum_amplitude():
    # coherent state |<0|D(a)|0>| = exp(-|a|^2 / 2)
    alpha = 0.4
    state = fock.apply(fock.gate_matrix(fock.Displacement(alpha), 30), fock.vacuum(30))
    assert abs(state.amplitudes[0] - np.exp(-0.08)) < 1e-10


def test_displacement_inverse_protected_block():
    d = 20
    for alpha in (0.3, -0.8 + 0.4j, 1.0j):
        u1 = fock.gate_matrix(fock.Displacement(alpha), d).entries
        u2 = fock.gate_matrix(fock.Displacement(-alpha), d).entries
        block = (u1 @ u2 - np.eye(d))[: d // 2, : d // 2]
        assert np.max(np.abs(block)) < 1e-6


def test_exp_gates_unitary_on_protected_block():
    d = 20
    for gate in (fock.Displacement(0.9 + 0.3j), fock.Squeeze(0.5)):
        u = fock.gate_matrix(gate, d).entries
        block = (u.conj().T @ u - np.eye(d))[:10, :10]
        assert np.max(np.abs(block)) < 1e-6


def test_quadrature_expectation_coherent():
    rng = np.random.default_rng(3)
    x_op = fock.quadrature_x(30)
    for _ in range(20):
        alpha = complex(*rng.uniform(-0.7, 0.7, 2))
        state = fock.apply(fock.gate_matrix(fock.Displacement(alpha), 30),
                           fock.vacuum(30))
        assert abs(fock.expectation(x_op, state) - np.sqrt(2) * alpha.real) < 1e-6


def test_squeezed_vacuum_variance():
    # <x^2> of S(r)|0> is exp(-2r)/2 in this convention
    r = 0.3
    state = fock.apply(fock.gate_matrix(fock.Squeeze(r), 40), fock.vacuum(40))
    x = fock.quadrature_x(40)
    x2 = fock.FockOperator(x.entries @ x.entries, 40)
    assert abs(fock.expectation(x2, state) - np.exp(-2 * r) / 2) < 1e-8


def test_cutoff_convergence():
    for d in (12, 20):
        state = fock.apply(fock.gate_matrix(fock.Displacement(0.5), d), fock.vacuum(d))
        val = fock.expectation(fock.quadrature_x(d), state)
        state2 = fock.apply(fock.gate_matrix(fock.Displacement(0.5), 2 * d),
                            fock.vacuum(2 * d))
        val2 = fock.expectation(fock.quadrature_x(2 * d), state2)
        assert abs(val - val2) < 1e-6


def test_beamsplitter_half_swap():
    # theta = pi/2 exchanges the two modes (up to sign)
    d = 4
    bs = fock.gate_matrix(fock.BeamSplitter(np.pi / 2), d).entries
    # |01> = photon in mode 1; little-endian index = 0 + d*1
    ket01 = np.zeros(d * d, dtype=complex)
    ket01[d * 1] = 1.0
    out = bs @ ket01
    # expect all weight on |10> (index 1)
    assert abs(abs(out[1]) - 1.0) < 1e-10


def test_tensor_embed_little_endian():
    d = 3
    n = fock.FockOperator(np.diag(np.arange(d)).astype(complex), d)
    on0 = fock.tensor_embed(n, 0, 2, d).entries
    on1 = fock.tensor_embed(n, 1, 2, d).entries
    # mode 0 varies fastest: index = n0 + d*n1
    assert np.allclose(np.diag(on0).real, np.tile(np.arange(d), d))
    assert np.allclose(np.diag(on1).real, np.repeat(np.arange(d), d))


def test_expectation_requires_hermitian():
    a, _ = fock.ladder(5)
    with pytest.raises(ValueError):
        fock.expectation(a, fock.vacuum(5))


def test_expectation_real_linear():
    rng = np.random.default_rng(9)
    m1 = rng.normal(size=(6, 6))
    m2 = rng.normal(size=(6, 6))
    h1 = fock.FockOperator((m1 + m1.T).astype(complex), 6)
    h2 = fock.FockOperator((m2 + m2.T).astype(complex), 6)
    amps = rng.normal(size=6) + 1j * rng.normal(size=6)
    state = fock.FockVector(amps / np.linalg.norm(amps), 6)
    combo = fock.FockOperator(2.0 * h1.entries + 3.0 * h2.entries, 6)
    lhs = fock.expectation(combo, state)
    rhs = 2.0 * fock.expectation(h1, state) + 3.0 * fock.expectation(h2, state)
    assert abs(lhs - rhs) < 1e-12


def test_apply_dimension_mismatch():
    with pytest.raises(ValueError):
        fock.apply(fock.quadrature_x(5), fock.vacuum(6))


def test_norm_invariant_rejected():
    with pytest.raises(ValueError):
        fock.FockVector(np.ones(4, dtype=complex), 4)


def test_number_state_bounds():
    with pytest.raises(ValueError):
        fock.number_state(7, 5)
    assert fock.number_state(2, 5).amplitudes[2] == 1.0
