"""Correlation matrices against a brute-force Heisenberg oracle.

The production path never forms O_i(t); these tests do exactly that with
scipy.linalg.expm on small systems and demand agreement to 1e-10, for
eigenstate references, raw vectors, and sector-projected probes alike.
"""
import numpy as np
import pytest
import scipy.linalg

from corrspec.correlator import (
    SV_FLOOR,
    ExponentRecord,
    ProbeSet,
    correlation_matrix,
    correlator_series,
    exponent_spectrum,
    exponent_subset,
    floored_log_singulars,
    majorana_probes,
    reference_state,
    subset_slice,
    xxz_probes,
    xxz_sector_probes,
)
from corrspec.models import (
    XxzSectorPlan,
    build_syk_hamiltonian,
    build_xxz_hamiltonian,
    sample_syk,
    sample_xxz,
)
from corrspec.operators import majorana_set, spin_site_operator
from corrspec.spectral import diagonalize, sz_sector


def heisenberg_oracle(h_full, left_full, right_full, phi_full, t):
    """G_ij(t) the slow way: form O_i(t) = e^{iHt} O_i e^{-iHt} explicitly."""
    u = scipy.linalg.expm(-1j * h_full * t)
    g = np.empty((len(left_full), len(right_full)), dtype=complex)
    for i, oi in enumerate(left_full):
        oit = u.conj().T @ oi @ u
        for j, oj in enumerate(right_full):
            g[i, j] = phi_full.conj() @ (oit @ (oj @ phi_full))
    return g


# ---------------------------------------------------------------- probe sets

def test_majorana_probes_shape():
    m = majorana_set(6)
    p = majorana_probes(m)
    assert p.kind == "syk_majorana" and p.n_probe == 6
    assert p.left is p.right


def test_xxz_probes_adjoint_pairing():
    p = xxz_probes(4)
    assert p.kind == "xxz_plus_minus" and p.n_probe == 4
    for lo, ro in zip(p.left, p.right):
        assert np.array_equal(lo, ro.conj().T)
    z = xxz_probes(4, kind="zz")
    assert z.kind == "xxz_zz"
    for lo, ro in zip(z.left, z.right):
        assert lo is ro and np.array_equal(lo, lo.conj().T)
    with pytest.raises(ValueError, match="probe kind"):
        xxz_probes(4, kind="pm")


def test_xxz_sector_probes_shapes():
    b3 = sz_sector(6, 3)
    b2 = sz_sector(6, 2)
    p = xxz_sector_probes(6, b3, b2)
    assert p.right[0].shape == (15, 20) and p.left[0].shape == (20, 15)
    for lo, ro in zip(p.left, p.right):
        assert np.array_equal(lo, ro.conj().T)
    z = xxz_sector_probes(6, b3, kind="zz")
    assert z.left[0].shape == (20, 20)
    with pytest.raises(ValueError, match="target sector"):
        xxz_sector_probes(6, b3)
    with pytest.raises(ValueError, match="probe kind"):
        xxz_sector_probes(6, b3, b2, kind="bad")


# ---------------------------------------------------------------- references

def test_reference_state_eigenstate():
    h = build_syk_hamiltonian(sample_syk(6, 1.0, seed=0), majorana_set(6))
    e = diagonalize(h)
    phi = reference_state(e, 3)
    assert phi.label == "eig3" and phi.index == 3
    assert phi.energy == float(e.eigenvalues[3])
    assert np.array_equal(phi.vector, e.eigenvectors[:, 3])
    with pytest.raises(ValueError, match="outside dimension"):
        reference_state(e, 8)


def test_reference_state_product_full_space():
    e = diagonalize(build_xxz_hamiltonian(sample_xxz(2, 0.0, seed=0)))
    phi = reference_state(e, "ud")
    assert phi.label == "prod:ud" and phi.energy is None
    assert phi.vector.tolist() == [0.0, 1.0, 0.0, 0.0]
    with pytest.raises(ValueError, match="length"):
        reference_state(e, "udud")
    with pytest.raises(ValueError, match="letters"):
        reference_state(e, "ux")


def test_reference_state_product_in_sector():
    basis = sz_sector(4, 2)
    plan = XxzSectorPlan(4, 2)
    e = diagonalize(plan.hamiltonian(sample_xxz(4, 0.5, seed=1).w))
    phi = reference_state(e, "udud", basis=basis)
    # pattern udud is computational index 5, second entry of the sector list
    assert np.nonzero(phi.vector)[0].tolist() == [1]
    with pytest.raises(ValueError, match="outside the working sector"):
        reference_state(e, "uudd".replace("d", "u"), basis=basis)
    with pytest.raises(ValueError, match="does not match the decomposition"):
        reference_state(e, "udud", basis=sz_sector(4, 1))


# ---------------------------------------------------------------- oracle: SYK

@pytest.mark.parametrize("t", [0.0, 0.8, 5.0])
def test_syk_eigenstate_matches_oracle(t):
    m = majorana_set(6)
    h = build_syk_hamiltonian(sample_syk(6, 1.0, seed=2), m)
    e = diagonalize(h)
    phi = reference_state(e, 3)
    g = correlation_matrix(e, majorana_probes(m), phi, t)
    want = heisenberg_oracle(h, m.ops, m.ops, phi.vector, t)
    assert np.max(np.abs(g.entries - want)) <= 1e-10


def test_syk_general_vector_matches_oracle():
    m = majorana_set(10)
    h = build_syk_hamiltonian(sample_syk(10, 1.0, seed=3), m)
    e = diagonalize(h)
    rng = np.random.default_rng(4)
    v = rng.standard_normal(32) + 1j * rng.standard_normal(32)
    v /= np.linalg.norm(v)
    for t in (0.0, 1.3):
        g = correlation_matrix(e, majorana_probes(m), v, t)
        assert g.state_label == "custom"
        want = heisenberg_oracle(h, m.ops, m.ops, v, t)
        assert np.max(np.abs(g.entries - want)) <= 1e-10


# ---------------------------------------------------------------- oracle: XXZ

def test_xxz_sector_eigenstate_matches_full_space_oracle():
    n = 6
    f = sample_xxz(n, 0.5, seed=5)
    b3, b2 = sz_sector(n, 3), sz_sector(n, 2)
    e0 = diagonalize(XxzSectorPlan(n, 3).hamiltonian(f.w))
    e1 = diagonalize(XxzSectorPlan(n, 2).hamiltonian(f.w))
    probes = xxz_sector_probes(n, b3, b2)
    phi = reference_state(e0, 7)
    h_full = build_xxz_hamiltonian(f)
    phi_full = np.zeros(1 << n, dtype=complex)
    phi_full[b3.kept_indices] = phi.vector
    plus = [spin_site_operator("plus", s, n) for s in range(1, n + 1)]
    minus = [spin_site_operator("minus", s, n) for s in range(1, n + 1)]
    for t in (0.0, 2.1):
        g = correlation_matrix(e0, probes, phi, t, probe_sector=e1)
        want = heisenberg_oracle(h_full, plus, minus, phi_full, t)
        assert np.max(np.abs(g.entries - want)) <= 1e-10


def test_xxz_product_state_matches_full_space_oracle():
    n = 4
    f = sample_xxz(n, 0.5, seed=6)
    b2, b1 = sz_sector(n, 2), sz_sector(n, 1)
    e0 = diagonalize(XxzSectorPlan(n, 2).hamiltonian(f.w))
    e1 = diagonalize(XxzSectorPlan(n, 1).hamiltonian(f.w))
    probes = xxz_sector_probes(n, b2, b1)
    phi = reference_state(e0, "udud", basis=b2)
    h_full = build_xxz_hamiltonian(f)
    phi_full = np.zeros(1 << n, dtype=complex)
    phi_full[b2.kept_indices] = phi.vector
    plus = [spin_site_operator("plus", s, n) for s in range(1, n + 1)]
    minus = [spin_site_operator("minus", s, n) for s in range(1, n + 1)]
    for t in (0.0, 0.9, 4.0):
        g = correlation_matrix(e0, probes, phi, t, probe_sector=e1)
        want = heisenberg_oracle(h_full, plus, minus, phi_full, t)
        assert np.max(np.abs(g.entries - want)) <= 1e-10


def test_xxz_zz_full_space_matches_oracle():
    n = 4
    f = sample_xxz(n, 1.0, seed=7)
    h = build_xxz_hamiltonian(f)
    e = diagonalize(h)
    probes = xxz_probes(n, kind="zz")
    rng = np.random.default_rng(8)
    v = rng.standard_normal(16)
    v /= np.linalg.norm(v)
    g = correlation_matrix(e, probes, v, 1.7)
    want = heisenberg_oracle(h, probes.left, probes.right, v.astype(complex), 1.7)
    assert np.max(np.abs(g.entries - want)) <= 1e-10


# ---------------------------------------------------------------- invariances

def test_probe_mixing_is_linear_and_preserves_singulars():
    m = majorana_set(6)
    h = build_syk_hamiltonian(sample_syk(6, 1.0, seed=9), m)
    e = diagonalize(h)
    phi = reference_state(e, 2)
    g = correlation_matrix(e, majorana_probes(m), phi, 0.6).entries
    rng = np.random.default_rng(10)
    r = np.linalg.qr(rng.standard_normal((6, 6)))[0]
    s = np.linalg.qr(rng.standard_normal((6, 6)))[0]
    mixed = ProbeSet(
        kind="syk_majorana",
        left=tuple(sum(r[i, a] * m.ops[a] for a in range(6)) for i in range(6)),
        right=tuple(sum(s[j, a] * m.ops[a] for a in range(6)) for j in range(6)),
    )
    g_mixed = correlation_matrix(e, mixed, phi, 0.6).entries
    assert np.max(np.abs(g_mixed - r @ g @ s.T)) <= 1e-12
    sv0 = np.linalg.svd(g, compute_uv=False)
    sv1 = np.linalg.svd(g_mixed, compute_uv=False)
    assert np.max(np.abs(sv0 - sv1)) <= 1e-12


def test_global_phase_of_reference_is_irrelevant():
    m = majorana_set(6)
    e = diagonalize(build_syk_hamiltonian(sample_syk(6, 1.0, seed=11), m))
    rng = np.random.default_rng(12)
    v = rng.standard_normal(8) + 1j * rng.standard_normal(8)
    v /= np.linalg.norm(v)
    g1 = correlation_matrix(e, majorana_probes(m), v, 1.1).entries
    g2 = correlation_matrix(e, majorana_probes(m), np.exp(0.73j) * v, 1.1).entries
    assert np.max(np.abs(g1 - g2)) <= 1e-12


def test_xxz_correlation_matrix_is_complex_symmetric():
    n = 6
    f = sample_xxz(n, 0.5, seed=13)
    b3, b2 = sz_sector(n, 3), sz_sector(n, 2)
    e0 = diagonalize(XxzSectorPlan(n, 3).hamiltonian(f.w))
    e1 = diagonalize(XxzSectorPlan(n, 2).hamiltonian(f.w))
    probes = xxz_sector_probes(n, b3, b2)
    phi = reference_state(e0, 4)
    for t in (0.3, 8.0):
        g = correlation_matrix(e0, probes, phi, t, probe_sector=e1).entries
        assert np.max(np.abs(g - g.T)) <= 1e-10


def test_syk_equal_time_sum_rule():
    # {psi_i, psi_j} = delta_ij makes G(0) + G(0)^T the identity
    m = majorana_set(8)
    e = diagonalize(build_syk_hamiltonian(sample_syk(8, 1.0, seed=14), m))
    phi = reference_state(e, 5)
    g = correlation_matrix(e, majorana_probes(m), phi, 0.0).entries
    assert np.max(np.abs(g + g.T - np.eye(8))) <= 1e-10


def test_entry_magnitude_bounds():
    m = majorana_set(8)
    e = diagonalize(build_syk_hamiltonian(sample_syk(8, 1.0, seed=15), m))
    phi = reference_state(e, 0)
    for t in (0.0, 3.0):
        g = correlation_matrix(e, majorana_probes(m), phi, t).entries
        assert np.max(np.abs(g)) <= 0.5 + 1e-12
    n = 6
    f = sample_xxz(n, 0.5, seed=16)
    e0 = diagonalize(XxzSectorPlan(n, 3).hamiltonian(f.w))
    e1 = diagonalize(XxzSectorPlan(n, 2).hamiltonian(f.w))
    probes = xxz_sector_probes(n, sz_sector(n, 3), sz_sector(n, 2))
    phi = reference_state(e0, 9)
    g = correlation_matrix(e0, probes, phi, 2.2, probe_sector=e1).entries
    assert np.max(np.abs(g)) <= 1.0 + 1e-12


def test_dimension_mismatch_raises():
    m = majorana_set(6)
    e = diagonalize(build_syk_hamiltonian(sample_syk(6, 1.0, seed=17), m))
    with pytest.raises(ValueError, match="dimension mismatch"):
        correlation_matrix(e, majorana_probes(m), np.ones(5), 0.0)


# ---------------------------------------------------------------- exponents

def test_exponent_spectrum_of_identity_is_zero():
    rec = exponent_spectrum(np.eye(7))
    assert np.max(np.abs(rec.lambdas)) == 0.0
    assert not rec.floor_flags.any()


def test_exponent_spectrum_rejects_non_finite():
    g = np.eye(3, dtype=complex)
    g[1, 1] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        exponent_spectrum(g)


def test_exponent_spectrum_matches_gram_eigenvalues():
    m = majorana_set(8)
    e = diagonalize(build_syk_hamiltonian(sample_syk(8, 1.0, seed=18), m))
    g = correlation_matrix(e, majorana_probes(m), reference_state(e, 3), 2.5)
    rec = exponent_spectrum(g)
    assert rec.t == 2.5 and rec.state_label == "eig3"
    assert np.all(np.diff(rec.lambdas) <= 0)
    gram = np.linalg.eigvalsh(g.entries.conj().T @ g.entries)[::-1]
    assert np.max(np.abs(np.exp(2 * rec.lambdas) - gram) / gram) <= 1e-10


def test_floor_flags_on_singular_matrix():
    g = np.diag([1.0, 1e-200])
    rec = exponent_spectrum(g)
    assert rec.floor_flags.tolist() == [False, True]
    assert rec.lambdas[1] == np.log(SV_FLOOR)
    lam, flags = floored_log_singulars(np.array([1.0, 0.0]))
    assert flags.tolist() == [False, True] and lam[1] == np.log(SV_FLOOR)


def test_exponent_subset_partitions():
    rec = ExponentRecord(t=0.0, state_label="x",
                         lambdas=np.array([4.0, 3.0, 2.0, 1.0]),
                         floor_flags=np.zeros(4, dtype=bool))
    assert exponent_subset(rec, "upper_half").tolist() == [4.0, 3.0]
    assert exponent_subset(rec, "lower_half").tolist() == [2.0, 1.0]
    assert exponent_subset(rec, "all").tolist() == [4.0, 3.0, 2.0, 1.0]
    assert subset_slice(4, "UPPER_HALF") == slice(0, 2)
    with pytest.raises(ValueError, match="even"):
        subset_slice(5, "upper_half")
    with pytest.raises(ValueError, match="policy"):
        subset_slice(4, "top")


# ---------------------------------------------------------------- series

def test_correlator_series_matches_single_time_calls():
    m = majorana_set(8)
    e = diagonalize(build_syk_hamiltonian(sample_syk(8, 1.0, seed=19), m))
    probes = majorana_probes(m)
    phi = reference_state(e, 6)
    times = [0.0, 0.5, 4.0]
    recs = correlator_series(e, probes, phi, times)
    assert [r.t for r in recs] == times
    for r, t in zip(recs, times):
        single = exponent_spectrum(correlation_matrix(e, probes, phi, t))
        assert np.max(np.abs(r.lambdas - single.lambdas)) <= 1e-12


def test_correlator_series_general_state_and_ordering():
    n = 4
    f = sample_xxz(n, 1.0, seed=20)
    e = diagonalize(build_xxz_hamiltonian(f))
    probes = xxz_probes(n, kind="zz")
    rng = np.random.default_rng(21)
    v = rng.standard_normal(16)
    v /= np.linalg.norm(v)
    fwd = correlator_series(e, probes, v, [0.8, 5.0])
    rev = correlator_series(e, probes, v, [5.0, 0.8])
    assert np.array_equal(fwd[0].lambdas, rev[1].lambdas)
    assert np.array_equal(fwd[1].lambdas, rev[0].lambdas)
    single = exponent_spectrum(correlation_matrix(e, probes, v, 5.0))
    assert np.max(np.abs(rev[0].lambdas - single.lambdas)) <= 1e-12
