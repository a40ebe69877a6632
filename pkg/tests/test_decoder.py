import math

import numpy as np
import pytest

from ctoq.decoder import (
    build_coherent_measurement,
    build_ctoq,
    build_eraser,
    build_theta,
    build_v_inv,
    delta_cl,
    delta_cl_tracenorm,
    delta_q,
    naimark_extend,
    noisy_ghz_state,
    povm_from_decoder,
    error_report,
    xi_bounds,
    xi_ef,
)
from ctoq.haarhp import haar_unitary
from ctoq.linop import Operator, identity, operator, partial_trace, permute, trace_distance
from ctoq.ppgm import build_ppgm
from ctoq.qcore import (
    Channel,
    Povm,
    apply_channel,
    compose,
    computational_basis,
    dephasing_channel,
    depolarizing_channel,
    identity_channel,
    max_entangled,
    pauli_basis,
    unitary_channel,
)
from ctoq.sampling import (
    ginibre,
    mub_pair,
    random_basis,
    random_block_channel,
    random_channel,
    random_density,
    random_povm,
)
from tests.test_qcore import projective_povm, spanning_states


# ---------------------------------------------------------------------------
# error functionals


def test_delta_q_identity_is_zero():
    assert delta_q(identity_channel(2), identity_channel(2)) < 1e-12


def test_delta_q_depolarized_qubit():
    assert delta_q(identity_channel(2), depolarizing_channel(2)) == pytest.approx(
        0.75, abs=1e-12
    )


def test_delta_q_matches_state_propagation_oracle():
    rng = np.random.default_rng(0)
    for _ in range(10):
        chan = random_channel(rng, 3, 4, 2)
        dec = random_channel(rng, 4, 3, 2)
        got = delta_q(dec, chan)
        assert 0.0 <= got <= 1.0 + 1e-12
        phi = max_entangled(3)
        through = apply_channel(dec, apply_channel(chan, phi, [0]), [0])
        assert got == pytest.approx(trace_distance(phi, through), abs=1e-11)


def test_delta_q_best_of_unitaries_stays_bounded():
    rng = np.random.default_rng(1)
    chan = random_channel(rng, 2, 2, 2)
    candidates = [identity_channel(2)] + [
        unitary_channel(haar_unitary(2, rng)) for _ in range(3)
    ]
    best = min(delta_q(d, chan) for d in candidates)
    assert 0.0 <= best <= 1.0 + 1e-12


def test_delta_cl_perfect_and_uniform():
    z = computational_basis(3)
    assert delta_cl(projective_povm(z), identity_channel(3), z) < 1e-12
    assert delta_cl(
        projective_povm(z), depolarizing_channel(3), z
    ) == pytest.approx(2 / 3, abs=1e-12)


def test_delta_cl_sum_form_equals_tracenorm_form():
    rng = np.random.default_rng(2)
    for i in range(20):
        d = (2, 3, 4)[i % 3]
        dc = d + i % 2
        chan = random_channel(rng, d, dc, int(rng.integers(1, 4)))
        povm = random_povm(rng, dc, d)
        basis = random_basis(rng, d)
        a = delta_cl(povm, chan, basis)
        b = delta_cl_tracenorm(povm, chan, basis)
        assert a == pytest.approx(b, abs=1e-10)


# ---------------------------------------------------------------------------
# dilation


def test_naimark_projective_exact():
    z = computational_basis(2)
    ext = naimark_extend(projective_povm(z))
    v = ext.isometry.data
    for j, el in enumerate(projective_povm(z)):
        rec = v.conj().T @ ext.projections[j].data @ v
        np.testing.assert_allclose(rec, el.data, atol=1e-14)


def test_naimark_trine_reconstruction():
    # three symmetric qubit states, elements (2/3) |psi_k><psi_k|
    els = []
    for k in range(3):
        ang = 2 * math.pi * k / 3
        psi = np.array([math.cos(ang / 2), math.sin(ang / 2)], dtype=complex)
        els.append(operator(2 / 3 * np.outer(psi, psi.conj()), 2))
    povm = Povm(tuple(els))
    ext = naimark_extend(povm)
    v = ext.isometry.data
    np.testing.assert_allclose(v.conj().T @ v, np.eye(2), atol=1e-12)
    for j, el in enumerate(povm):
        rec = v.conj().T @ ext.projections[j].data @ v
        assert np.max(np.abs(rec - el.data)) < 1e-12


def test_naimark_random_povm_isometry():
    rng = np.random.default_rng(3)
    povm = random_povm(rng, 4, 3)
    ext = naimark_extend(povm)
    v = ext.isometry.data
    np.testing.assert_allclose(v.conj().T @ v, np.eye(4), atol=1e-12)


def test_build_v_inv_isometry_and_range_action():
    rng = np.random.default_rng(4)
    povm = random_povm(rng, 3, 3)
    ext = naimark_extend(povm)
    v = ext.isometry.data
    e0 = v[:, 0]
    e0p = np.zeros(3, dtype=complex)
    e0p[0] = 1.0
    vinv = build_v_inv(ext, e0, e0p).data
    np.testing.assert_allclose(
        vinv.conj().T @ vinv, np.eye(v.shape[0]), atol=1e-12
    )
    # on the range: V_inv V|c> = |c> (x) |e0>
    c = ginibre(rng, 3, 1)[:, 0]
    c /= np.linalg.norm(c)
    got = vinv @ (v @ c)
    np.testing.assert_allclose(got, np.kron(c, e0), atol=1e-12)


def test_build_v_inv_unitary_dilation_case():
    # projective POVM on 1 outcome: V is unitary, second term vanishes
    povm = Povm((identity(2),))
    ext = naimark_extend(povm)
    v = ext.isometry.data
    e0 = v[:, 0]
    e0p = np.array([1.0, 0.0], dtype=complex)
    vinv = build_v_inv(ext, e0, e0p).data
    rng = np.random.default_rng(5)
    x = ginibre(rng, 2, 1)[:, 0]
    np.testing.assert_allclose(vinv @ x, np.kron(v.conj().T @ x, e0), atol=1e-12)


def test_build_v_inv_rejects_vector_outside_range():
    z = computational_basis(2)
    ext = naimark_extend(projective_povm(z))
    v = ext.isometry.data
    comp = np.zeros(v.shape[0], dtype=complex)
    comp[1] = 1.0  # (c=0, outcome=1) is orthogonal to range for projective Z
    comp = comp - v @ (v.conj().T @ comp)
    comp /= np.linalg.norm(comp)
    with pytest.raises(ValueError):
        build_v_inv(ext, comp, np.array([1.0, 0.0]))


# ---------------------------------------------------------------------------
# coherent measurement


def explicit_coherent_channel(ext, e_basis, rho: Operator) -> Operator:
    """Reference path: dense dilation isometry, then trace out the dilation
    space in the computational basis."""
    v = ext.isometry.data
    d = ext.n_outcomes
    dc = v.shape[1]
    e0 = v[:, 0]
    e0p = np.zeros(dc, dtype=complex)
    e0p[0] = 1.0
    vinv = build_v_inv(ext, e0, e0p).data
    g = sum(
        np.kron(p.data, e_basis.column(j).reshape(-1, 1))
        for j, p in enumerate(ext.projections)
    )
    r_full = np.kron(vinv, np.eye(d)) @ g @ v  # C -> (C, C', A)
    big = Operator(
        r_full @ rho.data @ r_full.conj().T,
        (dc, v.shape[0], d),
        (dc, v.shape[0], d),
    )
    return partial_trace(big, [0, 2])


def test_coherent_measurement_matches_explicit_dilation():
    rng = np.random.default_rng(6)
    for d, dc in ((2, 2), (2, 3), (3, 4)):
        povm = random_povm(rng, dc, d)
        basis = random_basis(rng, d)
        ext = naimark_extend(povm)
        ch = build_coherent_measurement(ext, basis)
        for _ in range(3):
            rho = random_density(rng, dc)
            got = apply_channel(ch, rho)
            want = explicit_coherent_channel(ext, basis, rho)
            np.testing.assert_allclose(got.data, want.data, atol=1e-10)


def test_coherent_measurement_trace_preserving():
    rng = np.random.default_rng(7)
    povm = random_povm(rng, 3, 2)
    ch = build_coherent_measurement(naimark_extend(povm), random_basis(rng, 2))
    rho = random_density(rng, 3)
    assert apply_channel(ch, rho).trace() == pytest.approx(1.0, abs=1e-10)


def test_coherent_measurement_register_marginal_statistics():
    # the outcome register's marginal is diagonal in the storage basis with
    # the POVM's outcome probabilities
    rng = np.random.default_rng(8)
    povm = random_povm(rng, 3, 3)
    basis = random_basis(rng, 3)
    ch = build_coherent_measurement(naimark_extend(povm), basis)
    rho = random_density(rng, 3)
    out = apply_channel(ch, rho)  # dims (3, 3): (C, register)
    marg = partial_trace(out, [1]).data
    u = basis.matrix
    in_basis = u.conj().T @ marg @ u
    probs = [
        float(np.einsum("ij,ji->", rho.data, m.data).real) for m in povm
    ]
    np.testing.assert_allclose(in_basis, np.diag(probs), atol=1e-10)


# ---------------------------------------------------------------------------
# phase correction and eraser


def test_build_theta_same_basis_is_identity_like():
    rng = np.random.default_rng(9)
    b = random_basis(rng, 3)
    for l in range(3):
        th = build_theta(b, b, l).data
        # diagonal in the basis, unit-modulus entries
        diag = b.matrix.conj().T @ th @ b.matrix
        np.testing.assert_allclose(diag, np.diag(np.diagonal(diag)), atol=1e-12)
        np.testing.assert_allclose(np.abs(np.diagonal(diag)), 1.0, atol=1e-12)


def test_build_theta_qubit_z_x():
    z, x = pauli_basis(1, "z"), pauli_basis(1, "x")
    np.testing.assert_allclose(build_theta(z, x, 0).data, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(
        build_theta(z, x, 1).data, np.diag([1.0, -1.0]), atol=1e-14
    )


def test_build_theta_unitary_random():
    rng = np.random.default_rng(10)
    for _ in range(5):
        e = random_basis(rng, 4)
        f = random_basis(rng, 4)
        for l in range(4):
            th = build_theta(e, f, l).data
            assert np.max(np.abs(th.conj().T @ th - np.eye(4))) < 1e-12


def test_eraser_single_outcome_is_partial_trace():
    rng = np.random.default_rng(11)
    povm = Povm((identity(3),))
    ch = build_eraser(povm, [identity(2)])
    rho = random_density(rng, 6)
    state = Operator(rho.data, (3, 2), (3, 2))
    got = apply_channel(ch, state, targets=[0, 1])
    np.testing.assert_allclose(
        got.data, partial_trace(state, [1]).data, atol=1e-12
    )


def test_eraser_projective_outcome_applies_phase():
    rng = np.random.default_rng(12)
    f = random_basis(rng, 2)
    povm = projective_povm(f)
    thetas = [build_theta(random_basis(rng, 2), f, l) for l in range(2)]
    ch = build_eraser(povm, thetas)
    rho = random_density(rng, 2)
    for l in range(2):
        proj = np.outer(f.column(l), f.column(l).conj())
        state = Operator(np.kron(proj, rho.data), (2, 2), (2, 2))
        got = apply_channel(ch, state, targets=[0, 1])
        want = thetas[l].data @ rho.data @ thetas[l].data.conj().T
        np.testing.assert_allclose(got.data, want, atol=1e-12)


def test_eraser_invariant_under_slicing_basis():
    # the Kraus set traces out C in the computational basis; any orthonormal
    # slicing basis defines the same channel
    rng = np.random.default_rng(24)
    povm = random_povm(rng, 3, 2)
    e, f = random_basis(rng, 2), random_basis(rng, 2)
    thetas = [build_theta(e, f, l) for l in range(2)]
    ch = build_eraser(povm, thetas)
    q = haar_unitary(3, rng).data  # random slicing basis of C
    from ctoq.linop import sqrtm_psd
    from ctoq.qcore import channel

    alt_ks = []
    for m_el, th in zip(povm, thetas):
        root = sqrtm_psd(m_el.data)
        for m in range(3):
            row = q[:, m].conj() @ root
            alt_ks.append(th.data @ np.kron(row.reshape(1, -1), np.eye(2)))
    alt = channel(alt_ks, (3, 2), (2,))
    for _ in range(5):
        rho = random_density(rng, 6)
        state = Operator(rho.data, (3, 2), (3, 2))
        np.testing.assert_allclose(
            apply_channel(ch, state, targets=[0, 1]).data,
            apply_channel(alt, state, targets=[0, 1]).data,
            atol=1e-11,
        )


def test_eraser_trace_preserving():
    rng = np.random.default_rng(13)
    povm = random_povm(rng, 3, 2)
    thetas = [build_theta(random_basis(rng, 2), random_basis(rng, 2), l) for l in range(2)]
    ch = build_eraser(povm, thetas)
    rho = random_density(rng, 6)
    state = Operator(rho.data, (3, 2), (3, 2))
    assert apply_channel(ch, state, targets=[0, 1]).trace() == pytest.approx(
        1.0, abs=1e-10
    )


# ---------------------------------------------------------------------------
# the assembled decoder


def test_ctoq_perfect_case():
    z, x = pauli_basis(1, "z"), pauli_basis(1, "x")
    dec = build_ctoq(projective_povm(z), projective_povm(x), z, x)
    assert delta_q(dec.total, identity_channel(2)) < 1e-9


def test_report_all_zero_for_perfect_mub_instance():
    z, x = pauli_basis(1, "z"), pauli_basis(1, "x")
    rep = error_report(
        identity_channel(2), projective_povm(z), projective_povm(x), z, x
    )
    assert rep.delta_cl_e < 1e-12 and rep.delta_cl_f < 1e-12
    assert abs(rep.xi_ef) < 1e-12
    assert rep.delta_q < 1e-9 and rep.delta_q_bound < 1e-6
    assert rep.xi_bound_min < 1e-12 and rep.xi_bound_avg < 1e-12


def test_ctoq_dephasing_case():
    z, x = pauli_basis(1, "z"), pauli_basis(1, "x")
    chan = dephasing_channel(z)
    rep = error_report(chan, projective_povm(z), projective_povm(x), z, x)
    assert rep.delta_cl_e == pytest.approx(0.0, abs=1e-12)
    assert rep.delta_cl_f == pytest.approx(0.5, abs=1e-12)
    assert rep.delta_q <= math.sqrt(0.5) + 1e-9
    assert rep.delta_q_bound == pytest.approx(math.sqrt(0.5), abs=1e-7)


def test_ctoq_total_equals_composition():
    rng = np.random.default_rng(14)
    for d, dc in ((2, 2), (2, 3), (3, 3)):
        pe = random_povm(rng, dc, d)
        pf = random_povm(rng, dc, d)
        dec = build_ctoq(pe, pf, random_basis(rng, d), random_basis(rng, d))
        comp = compose(dec.eraser, dec.coherent)
        for s in spanning_states(dc):
            np.testing.assert_allclose(
                apply_channel(dec.total, s).data,
                apply_channel(comp, s).data,
                atol=1e-9,
            )


def test_ctoq_handles_multi_factor_measured_space():
    # POVM elements tagged with composite dims, as in the scrambling setup
    rng = np.random.default_rng(27)
    raw = random_povm(rng, 4, 2)
    pe = Povm(tuple(Operator(m.data, (2, 2), (2, 2)) for m in raw))
    raw = random_povm(rng, 4, 2)
    pf = Povm(tuple(Operator(m.data, (2, 2), (2, 2)) for m in raw))
    z, x = pauli_basis(1, "z"), pauli_basis(1, "x")
    dec = build_ctoq(pe, pf, z, x)
    assert dec.total.in_dims == (2, 2) and dec.total.out_dims == (2,)
    assert dec.coherent.out_dims == (2, 2, 2)
    comp = compose(dec.eraser, dec.coherent)
    for s in spanning_states(4)[:6]:
        state = Operator(s.data, (2, 2), (2, 2))
        np.testing.assert_allclose(
            apply_channel(dec.total, state, targets=[0, 1]).data,
            apply_channel(comp, state, targets=[0, 1]).data,
            atol=1e-9,
        )
    chan = random_channel(rng, 2, 4, 2)
    chan = Channel(
        tuple(Operator(k.data, (2, 2), (2,)) for k in chan.kraus), (2,), (2, 2)
    )
    assert delta_q(dec.total, chan) <= 1.0 + 1e-9


def test_ctoq_thetas_diagonal_in_storage_basis():
    rng = np.random.default_rng(15)
    e = random_basis(rng, 3)
    f = random_basis(rng, 3)
    dec = build_ctoq(
        random_povm(rng, 3, 3), random_povm(rng, 3, 3), e, f
    )
    for th in dec.thetas:
        diag = e.matrix.conj().T @ th.data @ e.matrix
        np.testing.assert_allclose(
            diag, np.diag(np.diagonal(diag)), atol=1e-12
        )
        assert np.max(np.abs(th.data @ th.data.conj().T - np.eye(3))) < 1e-12


def test_ctoq_with_ppgms_satisfies_bound():
    rng = np.random.default_rng(16)
    chan = random_channel(rng, 2, 3, 2)
    z, x = pauli_basis(1, "z"), pauli_basis(1, "x")
    pz = build_ppgm(chan, z).povm
    px = build_ppgm(chan, x).povm
    rep = error_report(chan, pz, px, z, x)
    assert rep.delta_q <= rep.delta_q_bound + 1e-9


# ---------------------------------------------------------------------------
# complementarity defect


def test_xi_zero_for_mub():
    rng = np.random.default_rng(17)
    for d in (2, 3, 4):
        e, f = mub_pair(d)
        chan = random_channel(rng, d, d, 2)
        povm = random_povm(rng, d, d)
        assert abs(xi_ef(chan, povm, e, f)) < 1e-12
        b_min, b_avg = xi_bounds(chan, povm, e, f)
        assert abs(b_min) < 1e-12 and abs(b_avg) < 1e-12


def test_xi_same_basis_projective():
    for d in (2, 3):
        z = computational_basis(d)
        chan = identity_channel(d)
        povm = projective_povm(z)
        assert xi_ef(chan, povm, z, z) == pytest.approx(1 - 1 / d, abs=1e-12)
        _, b_avg = xi_bounds(chan, povm, z, z)
        assert b_avg == pytest.approx(1 - 1 / d, abs=1e-12)


def test_xi_below_bounds_randomized():
    rng = np.random.default_rng(18)
    for i in range(20):
        d = (2, 3, 4)[i % 3]
        chan = random_channel(rng, d, d + 1, 2)
        povm = random_povm(rng, d + 1, d)
        e, f = random_basis(rng, d), random_basis(rng, d)
        xi = xi_ef(chan, povm, e, f)
        b_min, b_avg = xi_bounds(chan, povm, e, f)
        assert xi <= b_min + 1e-9
        assert xi <= b_avg + 1e-9


def test_report_exposes_basis_asymmetry():
    rng = np.random.default_rng(19)
    d = 3
    chan = random_channel(rng, d, d, 2)
    pe = random_povm(rng, d, d)
    pf = random_povm(rng, d, d)
    e, f = random_basis(rng, d), random_basis(rng, d)
    fwd = error_report(chan, pe, pf, e, f)
    rev = error_report(chan, pf, pe, f, e)
    assert fwd.delta_q <= fwd.delta_q_bound + 1e-9
    assert rev.delta_q <= rev.delta_q_bound + 1e-9
    assert fwd.delta_q_bound != pytest.approx(rev.delta_q_bound, abs=1e-6)


# ---------------------------------------------------------------------------
# decoder-derived POVMs and the three-party diagnostic


def test_povm_from_identity_decoder_is_projective():
    rng = np.random.default_rng(20)
    w = random_basis(rng, 3)
    povm = povm_from_decoder(identity_channel(3), w)
    for j, el in enumerate(povm):
        np.testing.assert_allclose(
            el.data,
            np.outer(w.column(j), w.column(j).conj()),
            atol=1e-12,
        )


def test_povm_from_decoder_complete_and_monotone():
    rng = np.random.default_rng(21)
    for _ in range(10):
        chan = random_channel(rng, 2, 3, 2)
        dec = random_channel(rng, 3, 2, 2)
        w = random_basis(rng, 2)
        povm = povm_from_decoder(dec, w)  # Povm validates completeness
        assert delta_cl(povm, chan, w) <= delta_q(dec, chan) + 1e-10


def test_noisy_ghz_identity_channel_is_ghz():
    z = computational_basis(2)
    state = noisy_ghz_state(identity_channel(2), z)
    vec = np.zeros(8)
    vec[0] = vec[7] = 1 / math.sqrt(2)
    np.testing.assert_allclose(state.data, np.outer(vec, vec), atol=1e-14)
    assert state.trace() == pytest.approx(1.0, abs=1e-12)


def test_noisy_ghz_matches_coherent_output_when_label_survives():
    rng = np.random.default_rng(22)
    e = random_basis(rng, 2)
    chan, povm_e = random_block_channel(rng, e, block_size=2)
    assert delta_cl(povm_e, chan, e) < 1e-12
    coh = build_coherent_measurement(naimark_extend(povm_e), e)
    after = apply_channel(chan, max_entangled(2), targets=[0])
    out = apply_channel(coh, after, targets=[0])  # (C, A, R)
    ref = noisy_ghz_state(chan, e)  # (R, C, A)
    assert trace_distance(permute(out, [2, 0, 1]), ref) < 1e-9
