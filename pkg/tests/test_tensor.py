import math

import numpy as np
import pytest

from asymtensor import tensor as tz
from asymtensor.errors import IllConditioned, NotComplexDomain, NotTraceless, ZeroTensor

ROT_BLOCK = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
NILPOTENT = np.array([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 0.0]])


def char_poly_oracle(t):
    """Coefficients (trace, minor, det) straight from the characteristic
    polynomial of the companion/eigenvalue route."""
    lam = np.linalg.eigvals(t)
    tr = lam.sum()
    mn = lam[0] * lam[1] + lam[0] * lam[2] + lam[1] * lam[2]
    dt = lam[0] * lam[1] * lam[2]
    return tr.real, mn.real, dt.real


def cubic_roots_oracle(p, q):
    """Roots of lam^3 + p lam - q via the companion matrix."""
    return np.roots([1.0, 0.0, p, -q])


def test_invariants_identity():
    inv = tz.invariants(np.eye(3))
    assert inv.trace == pytest.approx(3.0)
    assert inv.minor == pytest.approx(3.0)
    assert inv.det == pytest.approx(1.0)
    assert inv.magnitude == pytest.approx(math.sqrt(3.0))
    assert inv.isotropicity == pytest.approx(1.0)


def test_invariants_rotation_block():
    inv = tz.invariants(ROT_BLOCK)
    assert inv.trace == pytest.approx(0.0)
    assert inv.minor == pytest.approx(1.0)
    assert inv.det == pytest.approx(0.0)
    assert inv.discriminant == pytest.approx(-4.0)
    assert inv.tau_s == pytest.approx(0.0)
    assert inv.tau_r == pytest.approx(math.sqrt(2.0))


def test_invariants_linear_degenerate():
    inv = tz.invariants(np.diag([2.0, -1.0, -1.0]))
    assert inv.minor == pytest.approx(-3.0)
    assert inv.det == pytest.approx(2.0)
    assert inv.discriminant == pytest.approx(0.0, abs=1e-12)


def test_invariants_match_characteristic_polynomial():
    rng = np.random.default_rng(7)
    for _ in range(200):
        t = rng.uniform(-1, 1, (3, 3))
        tr, mn, dt = char_poly_oracle(t)
        inv = tz.invariants(t)
        assert inv.trace == pytest.approx(tr, abs=1e-10)
        assert inv.minor == pytest.approx(mn, abs=1e-10)
        assert inv.det == pytest.approx(dt, abs=1e-10)
        assert inv.magnitude**2 == pytest.approx(np.sum(t * t), rel=1e-12)


def test_invariants_similarity_invariance():
    rng = np.random.default_rng(11)
    for _ in range(50):
        t = rng.uniform(-1, 1, (3, 3))
        rot, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        s = rot @ t @ rot.T
        a, b = tz.invariants(t), tz.invariants(s)
        for f in ("trace", "minor", "det", "magnitude", "discriminant",
                  "isotropicity", "tau_s", "tau_r"):
            va, vb = getattr(a, f), getattr(b, f)
            assert vb == pytest.approx(va, rel=1e-9, abs=1e-10), f


def test_deviator_reconstruction():
    iso, dev = tz.deviator(np.eye(3))
    assert np.allclose(iso, np.eye(3))
    assert np.allclose(dev, 0.0)
    iso, dev = tz.deviator(np.diag([3.0, 0.0, 0.0]))
    assert np.allclose(iso, np.eye(3))
    assert np.allclose(dev, np.diag([2.0, -1.0, -1.0]))
    rng = np.random.default_rng(3)
    t = rng.uniform(-1, 1, (3, 3))
    iso, dev = tz.deviator(t)
    assert abs(tz.trace(dev)) <= 1e-14 * tz.magnitude(t)
    assert np.array_equal(iso + dev, iso + (t - iso))


def test_traceless_eigenvalues_diagonal():
    assert tz.traceless_eigenvalues(np.diag([1.0, 0.0, -1.0])) == pytest.approx((1, 0, -1))
    assert tz.traceless_eigenvalues(np.diag([2.0, -1.0, -1.0])) == pytest.approx((2, -1, -1))


def test_traceless_eigenvalues_rotation_block():
    lam = tz.traceless_eigenvalues(ROT_BLOCK)
    assert lam[0] == pytest.approx(0.0, abs=1e-12)
    assert lam[1] == pytest.approx(1j, abs=1e-12)
    assert lam[2] == pytest.approx(-1j, abs=1e-12)


def test_traceless_eigenvalues_vs_oracle():
    rng = np.random.default_rng(42)
    for _ in range(500):
        a = rng.uniform(-1, 1, (3, 3))
        a -= np.trace(a) / 3 * np.eye(3)
        p, q = float(tz.minor(a)), float(tz.det(a))
        got = tz.eigvals_from_pq(p, q)
        want = np.sort_complex(cubic_roots_oracle(p, q))
        got_sorted = np.sort_complex(got)
        scale = 1.0 + np.abs(want).max()
        assert np.max(np.abs(got_sorted - want)) <= 1e-8 * scale


def test_traceless_eigenvalues_requires_traceless():
    with pytest.raises(NotTraceless):
        tz.traceless_eigenvalues(np.eye(3))


def test_eigvals_extreme_small_minor():
    # arbitrarily close to the balanced set the hyperbolic branch must stay
    # finite and agree with the p = 0 cube-root limit
    for p in (-1e-320, -1e-150, 1e-150, 1e-320, 0.0):
        lam = tz.eigvals_from_pq(p, -0.4714045207910317)
        assert np.isfinite(lam.real).all()
        assert lam[0].real == pytest.approx(np.cbrt(-0.4714045207910317), rel=1e-6)


@pytest.mark.parametrize(
    "t,expected",
    [
        (np.diag([2.0, -1.0, -1.0]), (1.0, -1, 1)),
        (np.diag([1.0, 1.0, -2.0]), (1.0, -1, -1)),
        (np.diag([1.0, 0.0, -1.0]), (0.0, -1, 0)),
        (ROT_BLOCK, (0.0, 1, 0)),
        (np.array([[1.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, -1.0]]), (math.inf, 0, -1)),
    ],
)
def test_mode_catalog(t, expected):
    m = tz.mode(t)
    assert m.defined
    assert (m.mu, m.sign_p, m.sign_q) == pytest.approx(expected)


def test_mode_nilpotent_undefined():
    m = tz.mode(NILPOTENT)
    assert not m.defined
    assert m.sign_p == 0 and m.sign_q == 0


def test_mode_scale_invariant():
    rng = np.random.default_rng(5)
    for _ in range(50):
        a = rng.uniform(-1, 1, (3, 3))
        a -= np.trace(a) / 3 * np.eye(3)
        m1, m2 = tz.mode(a), tz.mode(7.5 * a)
        assert m1.sign_p == m2.sign_p and m1.sign_q == m2.sign_q
        if math.isfinite(m1.mu):
            assert m2.mu == pytest.approx(m1.mu, rel=1e-12)


def test_isotropicity():
    assert tz.isotropicity(np.eye(3)) == pytest.approx(1.0)
    assert tz.isotropicity(-np.eye(3)) == pytest.approx(-1.0)
    assert tz.isotropicity(ROT_BLOCK) == pytest.approx(0.0)
    t = np.diag([2.0, 1.0, 1.0])
    assert tz.isotropicity(t) == pytest.approx(4.0 / (math.sqrt(3) * math.sqrt(6.0)))
    with pytest.raises(ZeroTensor):
        tz.isotropicity(np.zeros((3, 3)))
    rng = np.random.default_rng(9)
    for _ in range(50):
        t = rng.uniform(-1, 1, (3, 3))
        assert -1.0 <= tz.isotropicity(t) <= 1.0
        assert tz.isotropicity(3.0 * t) == pytest.approx(tz.isotropicity(t), rel=1e-12)


def test_complex_structure_rotation_block():
    cs = tz.complex_structure(ROT_BLOCK)
    assert cs.lam_real == pytest.approx(0.0, abs=1e-12)
    assert abs(cs.v_real @ np.array([0, 0, 1.0])) == pytest.approx(1.0)
    assert cs.eccentricity == pytest.approx(0.0, abs=1e-9)
    # invariant plane is the xy plane
    assert np.allclose(np.abs(cs.plane_basis[:, 2]), 0.0, atol=1e-12)


def test_complex_structure_dual_axes():
    t = np.array([[0.0, -2.0, 0.0], [0.5, 0.0, 0.0], [0.0, 0.0, 0.0]])
    cs = tz.complex_structure(t)
    # svd oracle on the complex eigenvector orbit of the 2x2 block
    assert abs(cs.dual_major @ np.array([1.0, 0, 0])) == pytest.approx(1.0, abs=1e-9)
    assert abs(cs.dual_minor @ np.array([0, 1.0, 0])) == pytest.approx(1.0, abs=1e-9)
    assert cs.eccentricity == pytest.approx(math.sqrt(1 - 0.25), abs=1e-9)
    assert abs(cs.dual_major @ cs.dual_minor) < 1e-10


def test_complex_structure_invariant_plane_is_invariant():
    rng = np.random.default_rng(17)
    n = 0
    while n < 40:
        t = rng.uniform(-1, 1, (3, 3))
        if tz.discriminant(t) >= -1e-6:
            continue
        n += 1
        cs = tz.complex_structure(t)
        w1, w2 = cs.plane_basis
        for w in (w1, w2):
            img = t @ w
            # image stays in span(w1, w2)
            rem = img - (img @ w1) * w1 - (img @ w2) * w2
            assert np.linalg.norm(rem) < 1e-8 * (1 + tz.magnitude(t))
        assert abs(cs.dual_major @ cs.dual_minor) < 1e-10
        res = np.linalg.norm(t @ cs.v_real - cs.lam_real * cs.v_real)
        assert res <= 1e-8 * (1 + tz.magnitude(t))
        # eigenvalue sum reconstructs the trace
        s = cs.lam_real + 2 * cs.complex_pair.real
        assert s == pytest.approx(tz.trace(t), abs=1e-8 * (1 + tz.magnitude(t)))


def test_complex_structure_eccentricity_rises_near_degenerate():
    # family approaching the degenerate surface from the complex side
    eccs = []
    for eps in (0.5, 0.2, 0.05, 0.01):
        t = np.array([[1.0, -1.0 - eps, 0.0], [1.0, -1.0, 0.0], [0.0, 0.0, 0.0]])
        eccs.append(tz.complex_structure(t).eccentricity)
    assert all(b > a for a, b in zip(eccs, eccs[1:]))
    assert eccs[-1] > 0.9


def test_complex_structure_rejects_real_domain():
    with pytest.raises(NotComplexDomain):
        tz.complex_structure(np.diag([1.0, 0.0, -1.0]))


def test_real_eigenvectors_diagonal():
    v1, v2, v3 = tz.real_eigenvectors(np.diag([1.0, 0.0, -1.0]))
    assert np.allclose(v1, [1, 0, 0])
    assert np.allclose(v2, [0, 1, 0])
    assert np.allclose(v3, [0, 0, 1])


def test_real_eigenvectors_upper_triangular():
    t = np.array([[2.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, -2.0]])
    v1, v2, v3 = tz.real_eigenvectors(t)
    assert np.allclose(v1, [1, 0, 0])
    for lam, v in ((2.0, v1), (0.0, v2), (-2.0, v3)):
        assert np.linalg.norm(t @ v - lam * v) <= 1e-10 * (1 + tz.magnitude(t))


def test_real_eigenvectors_recover_conjugation():
    rng = np.random.default_rng(23)
    for _ in range(30):
        d = np.diag(np.sort(rng.uniform(-2, 2, 3))[::-1])
        if min(abs(np.diff(np.diag(d)))) < 0.2:
            continue
        g = rng.normal(size=(3, 3))
        t = g @ d @ np.linalg.inv(g)
        if tz.discriminant(t - np.trace(t) / 3 * np.eye(3)) <= 1e-9:
            continue
        vs = tz.real_eigenvectors(t)
        for col, v in enumerate(vs):
            truth = g[:, col] / np.linalg.norm(g[:, col])
            assert min(np.linalg.norm(v - truth), np.linalg.norm(v + truth)) < 1e-7


def test_classify_examples():
    c = tz.classify(np.diag([2.0, -1.0, -1.0]))
    assert c.domain == "real" and c.anisotropy == "linear" and c.on_degenerate

    c = tz.classify(ROT_BLOCK)
    assert c.domain == "complex_inner" and c.anisotropy == "neutral" and c.on_neutral

    c = tz.classify(NILPOTENT)
    assert c.triple_degenerate
    assert c.on_degenerate and c.on_balanced and c.on_neutral


def test_classify_triple_implies_all_boundaries():
    rng = np.random.default_rng(31)
    for _ in range(100):
        t = rng.uniform(-1, 1, (3, 3))
        c = tz.classify(t)
        if c.triple_degenerate:
            assert c.on_degenerate and c.on_balanced and c.on_neutral
        if c.domain == "real":
            assert tz.discriminant(t) >= -1e-6


def test_classify_degenerate_crossing_bracketed():
    # straight path in tensor space from real to complex domain
    t0 = np.diag([1.0, 0.2, -1.2])
    t1 = ROT_BLOCK * 1.3
    assert tz.classify(t0).domain == "real"
    assert tz.classify(t1).domain.startswith("complex")
    prev = tz.discriminant(t0)
    crossed = False
    for s in np.linspace(0, 1, 4001):
        t = (1 - s) * t0 + s * t1
        d = tz.discriminant(t)
        if prev > 0 >= d or tz.classify(t, tol=1e-6).on_degenerate:
            crossed = True
        prev = d
    assert crossed


def test_balanced_recipe_gives_zero_minor():
    # Schur recipe: c^2 = a^2 + a*b + b^2 makes the tensor balanced
    rng = np.random.default_rng(13)
    for _ in range(200):
        a, b = rng.uniform(-1, 1, 2)
        c = math.sqrt(a * a + a * b + b * b) * (1 if rng.random() < 0.5 else -1)
        d, e = rng.uniform(-1, 1, 2)
        m = np.array([[a, -c, d], [c, b, e], [0.0, 0.0, -a - b]])
        rot, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        t = rot @ m @ rot.T
        inv = tz.invariants(t)
        nrm = inv.magnitude
        assert abs(inv.minor) <= 1e-9 * max(nrm * nrm, 1.0)
        assert abs(inv.tau_r - inv.tau_s) <= 1e-9 * max(nrm, 1.0)


def test_minor_sign_matches_rotation_shear_balance():
    # 3D: minor = (tau_r^2 - tau_s^2) / 2 on the deviator
    rng = np.random.default_rng(19)
    for _ in range(200):
        t = rng.uniform(-1, 1, (3, 3))
        _, a = tz.deviator(t)
        inv = tz.invariants(a)
        assert inv.minor == pytest.approx((inv.tau_r**2 - inv.tau_s**2) / 2, abs=1e-12)


def test_2d_block_reduction():
    # block form diag(2x2, 0): complex iff tau_r > tau_s on the block
    rng = np.random.default_rng(29)
    for _ in range(200):
        b = rng.uniform(-1, 1, (2, 2))
        b -= np.trace(b) / 2 * np.eye(2)
        t = np.zeros((3, 3))
        t[:2, :2] = b
        lam = np.linalg.eigvals(b)
        is_complex = np.abs(lam.imag).max() > 1e-9
        s = 0.5 * (t + t.T)
        r = 0.5 * (t - t.T)
        tau_s, tau_r = tz.magnitude(s), tz.magnitude(r)
        if abs(tau_r - tau_s) > 1e-8:
            assert is_complex == (tau_r > tau_s)


def test_eigen_decomposition_variants():
    d = tz.eigen_decomposition(np.diag([3.0, 1.0, -1.0]))
    assert d.kind == "real_distinct"
    assert d.eigenvalues == pytest.approx((3.0, 1.0, -1.0))

    d = tz.eigen_decomposition(ROT_BLOCK)
    assert d.kind == "complex"

    d = tz.eigen_decomposition(np.diag([2.0, -1.0, -1.0]))
    assert d.kind == "double_degenerate"
    assert d.lam_dominant == pytest.approx(2.0)
    assert d.lam_repeated == pytest.approx(-1.0)

    d = tz.eigen_decomposition(2.0 * np.eye(3))
    assert d.kind == "triple_degenerate"
    assert d.eigenvalues[0] == pytest.approx(2.0)


def test_eigenvalue_space_coords():
    pt = tz.eigenvalue_space_coords(np.diag([1.0, 0.0, -1.0]))
    assert pt.border_xy == pytest.approx([0.0, 1.0], abs=1e-12)  # top vertex
    assert pt.height == pytest.approx(0.0)

    pt = tz.eigenvalue_space_coords(np.eye(3))
    assert pt.at_apex and pt.height == pytest.approx(1.0)

    # linear degenerate sits at the vertex between the real-linear and
    # outer-complex-linear edges (150 degrees)
    pt = tz.eigenvalue_space_coords(np.diag([2.0, -1.0, -1.0]))
    assert pt.angle == pytest.approx(math.radians(150.0), abs=1e-9)

    pt = tz.eigenvalue_space_coords(NILPOTENT)
    assert pt.at_center

    with pytest.raises(ZeroTensor):
        tz.eigenvalue_space_coords(np.zeros((3, 3)))


def test_eigenvalue_space_edges_by_domain():
    # real domain maps to the two upper edges, inner complex to lower edges
    pt = tz.eigenvalue_space_coords(np.diag([1.0, 0.3, -1.3]))  # real linear
    assert pt.border_xy[1] > 0
    t = ROT_BLOCK + np.diag([0.05, 0.05, -0.1])  # inner complex
    pt = tz.eigenvalue_space_coords(t)
    assert pt.border_xy[1] < 0
