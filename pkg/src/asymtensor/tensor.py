"""Pointwise algebra of 3x3 asymmetric tensors.

Invariants, closed-form eigenvalues of traceless tensors, mode triples,
isotropicity, complex-domain structure (real eigenvector, invariant plane,
dual-eigenvector ellipse axes), and classification of a tensor into the
real / inner-complex / outer-complex regions.

Conventions used throughout:

* the characteristic polynomial of a traceless tensor A is
  ``lam^3 + p*lam - q`` with ``p = minor(A)`` (sum of principal 2x2
  minors) and ``q = det(A)``;
* the discriminant is ``delta = -27*q**2 - 4*p**3``; ``delta < 0`` iff A
  has a complex-conjugate eigenvalue pair;
* the mode magnitude is ``mu = (3*|q|/(2*|p|)) * sqrt(3/|p|)``.

Most low-level helpers accept arrays of shape (..., 3, 3) and broadcast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import IllConditioned, NotComplexDomain, NotTraceless, ZeroTensor

__all__ = [
    "Invariants",
    "ModeTriple",
    "TensorClassification",
    "EigenvalueSpacePoint",
    "trace",
    "minor",
    "det",
    "magnitude",
    "discriminant",
    "deviator",
    "invariants",
    "traceless_eigenvalues",
    "mode",
    "isotropicity",
    "complex_structure",
    "real_eigenvectors",
    "classify",
    "eigen_decomposition",
    "eigenvalue_space_coords",
]

# Relative tolerance for treating p (deg 2) and q (deg 3) as zero; they are
# scaled by ||A||^2 and ||A||^3 respectively because the invariants are
# homogeneous of those degrees.
SIGN_TOL = 1e-9


# ---------------------------------------------------------------------------
# batched invariant helpers


def trace(t):
    t = np.asarray(t, dtype=float)
    return t[..., 0, 0] + t[..., 1, 1] + t[..., 2, 2]


def minor(t):
    """Sum of the three principal 2x2 minors (coefficient a1 of the
    characteristic polynomial)."""
    t = np.asarray(t, dtype=float)
    m01 = t[..., 0, 0] * t[..., 1, 1] - t[..., 0, 1] * t[..., 1, 0]
    m02 = t[..., 0, 0] * t[..., 2, 2] - t[..., 0, 2] * t[..., 2, 0]
    m12 = t[..., 1, 1] * t[..., 2, 2] - t[..., 1, 2] * t[..., 2, 1]
    return m01 + m02 + m12


def det(t):
    t = np.asarray(t, dtype=float)
    return (
        t[..., 0, 0] * (t[..., 1, 1] * t[..., 2, 2] - t[..., 1, 2] * t[..., 2, 1])
        - t[..., 0, 1] * (t[..., 1, 0] * t[..., 2, 2] - t[..., 1, 2] * t[..., 2, 0])
        + t[..., 0, 2] * (t[..., 1, 0] * t[..., 2, 1] - t[..., 1, 1] * t[..., 2, 0])
    )


def magnitude(t):
    """Frobenius magnitude sqrt(<T, T>)."""
    t = np.asarray(t, dtype=float)
    return np.sqrt(np.sum(t * t, axis=(-2, -1)))


def discriminant(t):
    """Discriminant of the deviator: -27*det^2 - 4*minor^3.

    Negative exactly when the tensor has complex eigenvalues.
    """
    a = deviator_part(t)
    p = minor(a)
    q = det(a)
    return -27.0 * q * q - 4.0 * p * p * p


def deviator_part(t):
    """Traceless part T - (trace/3) I, batched."""
    t = np.asarray(t, dtype=float)
    a = t.copy()
    tr3 = trace(t) / 3.0
    for i in range(3):
        a[..., i, i] -= tr3
    return a


def _check_finite(t):
    t = np.asarray(t, dtype=float)
    if t.shape[-2:] != (3, 3):
        raise ValueError(f"expected a 3x3 tensor, got shape {t.shape}")
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor entries must be finite")
    return t


# ---------------------------------------------------------------------------
# invariants and decomposition


@dataclass(frozen=True)
class Invariants:
    """Scalar invariants of one tensor.

    ``minor``/``det`` are taken on the tensor itself; ``discriminant``,
    ``tau_s`` and ``tau_r`` on its deviator.  ``isotropicity`` is 0 for the
    zero tensor (where it is formally undefined).
    """

    trace: float
    minor: float
    det: float
    magnitude: float
    discriminant: float
    isotropicity: float
    tau_s: float
    tau_r: float


def invariants(t) -> Invariants:
    t = _check_finite(t)
    a = deviator_part(t)
    s = 0.5 * (a + a.swapaxes(-2, -1))
    r = 0.5 * (a - a.swapaxes(-2, -1))
    mag = float(magnitude(t))
    tr = float(trace(t))
    eta = tr / (math.sqrt(3.0) * mag) if mag > 0.0 else 0.0
    return Invariants(
        trace=tr,
        minor=float(minor(t)),
        det=float(det(t)),
        magnitude=mag,
        discriminant=float(-27.0 * det(a) ** 2 - 4.0 * minor(a) ** 3),
        isotropicity=eta,
        tau_s=float(magnitude(s)),
        tau_r=float(magnitude(r)),
    )


def deviator(t):
    """Split T into (isotropic part, deviator); the parts sum to T exactly."""
    t = _check_finite(t)
    iso = np.zeros_like(t)
    tr3 = trace(t) / 3.0
    for i in range(3):
        iso[..., i, i] = tr3
    return iso, t - iso


def isotropicity(t) -> float:
    """trace / (sqrt(3) * ||T||), in [-1, 1]; +-1 for multiples of I."""
    t = _check_finite(t)
    mag = float(magnitude(t))
    if mag == 0.0:
        raise ZeroTensor("isotropicity undefined for the zero tensor")
    return float(np.clip(trace(t) / (math.sqrt(3.0) * mag), -1.0, 1.0))


# ---------------------------------------------------------------------------
# closed-form eigenvalues of a traceless tensor


def eigvals_from_pq(p, q):
    """Eigenvalues of traceless tensors from (minor, det), vectorized.

    Returns a complex array of shape p.shape + (3,).  In the real domain the
    three entries are real and sorted descending; in the complex domain the
    entries are (real eigenvalue, a+bi, a-bi).

    The trigonometric / hyperbolic branch formulas are evaluated in guarded
    form: the arccos argument is clamped to [-1, 1] and the hyperbolic
    branches switch to log-space asymptotics when the argument would
    overflow, so the formulas stay finite arbitrarily close to the
    degenerate, balanced and triple-degenerate sets.
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p, q = np.broadcast_arrays(p, q)
    delta = -27.0 * q * q - 4.0 * p * p * p
    out = np.zeros(p.shape + (3,), dtype=complex)

    real_dom = delta >= 0.0
    # real domain requires p <= 0; p == 0 there implies q == 0 (triple zero)
    if np.any(real_dom):
        pm = np.where(real_dom & (p < 0.0), p, -1.0)
        qm = np.where(real_dom, q, 0.0)
        with np.errstate(invalid="ignore", divide="ignore"):
            arg = np.clip((3.0 * qm / (2.0 * pm)) * np.sqrt(-3.0 / pm), -1.0, 1.0)
            t3 = np.arccos(arg) / 3.0
            s = -2.0 * np.sqrt(-pm / 3.0)
            l_major = s * np.cos(t3 + 2.0 * np.pi / 3.0)
            l_minor = s * np.cos(t3)
            l_mid = s * np.cos(t3 - 2.0 * np.pi / 3.0)
        lams = np.stack([l_major, l_mid, l_minor], axis=-1)
        lams = np.where((real_dom & (p < 0.0))[..., None], lams, 0.0)
        out[real_dom] = lams[real_dom]

    cplx = ~real_dom
    if np.any(cplx):
        lam_r = np.zeros_like(p)
        ap = np.abs(p)
        aq = np.abs(q)
        sq = np.where(q >= 0.0, 1.0, -1.0)

        # p == 0 within floating noise: real root is cbrt(q)
        tiny = ap <= 1e-300
        lam_r = np.where(tiny, np.cbrt(q), lam_r)

        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            # cosh/sinh argument X = (3|q| / (2|p|)) * sqrt(3/|p|); recompute
            # in log space where the direct form overflows
            ap_safe = np.where(tiny, 1.0, ap)
            x = (3.0 * aq / (2.0 * ap_safe)) * np.sqrt(3.0 / ap_safe)
            big = ~np.isfinite(x) | (x > 1e12)
            logx = (
                np.log(np.where(aq > 0.0, aq, 1.0))
                - 1.5 * np.log(ap_safe)
                + math.log(3.0 * math.sqrt(3.0) / 2.0)
            )
            # acosh(X) and asinh(X) both approach log(2X)
            log2x = math.log(2.0) + logx
            x_mod = np.where(big, 1.0, x)

            neg = cplx & (p < 0.0) & ~tiny
            y = np.where(big, log2x, np.arccosh(np.maximum(x_mod, 1.0)))
            # 2*sqrt(|p|/3)*cosh(y/3), written as a sum of exponentials so the
            # huge cosh and the tiny sqrt factor cannot overflow separately
            half_log = 0.5 * np.log(ap_safe / 3.0)
            val = np.exp(half_log + y / 3.0) + np.exp(half_log - y / 3.0)
            lam_r = np.where(neg, sq * val, lam_r)

            pos = cplx & (p > 0.0) & ~tiny
            ys = np.where(big, log2x, np.arcsinh(x_mod))
            val_s = np.exp(half_log + ys / 3.0) - np.exp(half_log - ys / 3.0)
            lam_r = np.where(pos, sq * val_s, lam_r)

        a = -0.5 * lam_r
        b2 = p + 0.75 * lam_r * lam_r
        b = np.sqrt(np.maximum(b2, 0.0))
        lams = np.stack([lam_r + 0j, a + 1j * b, a - 1j * b], axis=-1)
        out[cplx] = lams[cplx]

    return out


def traceless_eigenvalues(a, tol_trace=1e-10):
    """Closed-form eigenvalues of a traceless 3x3 tensor.

    Returns ``(lam1, lam2, lam3)`` sorted descending when the discriminant is
    nonnegative, else ``(lam_real, a+bi, a-bi)``.

    Raises:
        NotTraceless: if |trace| > tol_trace * ||A|| (and ||A|| > 0).
    """
    a = _check_finite(a)
    nrm = float(magnitude(a))
    if abs(float(trace(a))) > tol_trace * max(nrm, 1e-300):
        raise NotTraceless(f"trace {float(trace(a)):g} exceeds tolerance")
    lams = eigvals_from_pq(float(minor(a)), float(det(a)))
    if abs(lams[1].imag) == 0.0:
        return (float(lams[0].real), float(lams[1].real), float(lams[2].real))
    return (float(lams[0].real), complex(lams[1]), complex(lams[2]))


# ---------------------------------------------------------------------------
# tensor mode


@dataclass(frozen=True)
class ModeTriple:
    """(mu, sign p, sign q) of a traceless tensor.

    ``mu`` is math.inf on the balanced set (p = 0, q != 0) and ``defined`` is
    False exactly on the triple degenerate set (p = q = 0).
    """

    mu: float
    sign_p: int
    sign_q: int
    defined: bool = True


def _sign_with_tol(value, tol):
    if value > tol:
        return 1
    if value < -tol:
        return -1
    return 0


def mode(a, tol=SIGN_TOL) -> ModeTriple:
    """Mode triple of a traceless tensor; p/q are treated as zero below
    tol * ||A||^2 and tol * ||A||^3 respectively."""
    a = _check_finite(a)
    nrm = float(magnitude(a))
    p = float(minor(a))
    q = float(det(a))
    sp = _sign_with_tol(p, tol * nrm * nrm)
    sq = _sign_with_tol(q, tol * nrm * nrm * nrm)
    if sp == 0 and sq == 0:
        return ModeTriple(mu=0.0, sign_p=0, sign_q=0, defined=False)
    if sp == 0:
        return ModeTriple(mu=math.inf, sign_p=0, sign_q=sq)
    mu = 0.0 if sq == 0 else (3.0 * abs(q) / (2.0 * abs(p))) * math.sqrt(3.0 / abs(p))
    return ModeTriple(mu=mu, sign_p=sp, sign_q=sq)


def mode_mu_batch(p, q):
    """Vectorized mu; inf where p == 0 and q != 0, and 0 where both vanish."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    ap = np.abs(p)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        mu = (3.0 * np.abs(q) / (2.0 * ap)) * np.sqrt(3.0 / ap)
    mu = np.where(ap == 0.0, np.where(q == 0.0, 0.0, np.inf), mu)
    return mu


# ---------------------------------------------------------------------------
# eigenvectors


def _unit_sign_convention(v):
    """Normalize and flip so the first component above noise is positive."""
    n = np.linalg.norm(v)
    if n == 0.0:
        return v
    v = v / n
    for c in v:
        if abs(c) > 1e-12:
            if c < 0.0:
                v = -v
            break
    return v


def _nullspace_vector(m):
    """Unit vector spanning the (numerically) least-resolved direction of m,
    via the cross product of the two most independent rows, with an SVD
    fallback when the rows are too collinear."""
    rows = np.asarray(m, dtype=float)
    best = None
    best_n = -1.0
    for i in range(3):
        for j in range(i + 1, 3):
            c = np.cross(rows[i], rows[j])
            n = np.linalg.norm(c)
            if n > best_n:
                best_n = n
                best = c
    scale = np.linalg.norm(rows)
    if best_n <= 1e-12 * max(scale * scale, 1e-300):
        _, _, vt = np.linalg.svd(rows)
        best = vt[-1]
    return _unit_sign_convention(best)


def real_eigenvectors(t, tol=SIGN_TOL):
    """Unit (major, medium, minor) eigenvectors of a real-domain tensor.

    Requires the deviator discriminant to be positive.  Each vector has its
    first nonzero component positive.  Raises IllConditioned when an
    eigenpair residual exceeds 1e-6 * (1 + ||T||).
    """
    t = _check_finite(t)
    a = deviator_part(t)
    delta = float(-27.0 * det(a) ** 2 - 4.0 * minor(a) ** 3)
    nrm = float(magnitude(a))
    if delta <= tol * max(nrm, 1e-300) ** 6:
        raise NotComplexDomain(
            "real eigenvector triple requires a strictly positive discriminant"
        )
    lams = eigvals_from_pq(float(minor(a)), float(det(a))).real
    shift = float(trace(t)) / 3.0
    vecs = []
    tmag = float(magnitude(t))
    for lam in lams:
        m = t - (lam + shift) * np.eye(3)
        v = _nullspace_vector(m)
        res = np.linalg.norm(t @ v - (lam + shift) * v)
        if res > 1e-6 * (1.0 + tmag):
            raise IllConditioned(f"eigenpair residual {res:g} too large")
        vecs.append(v)
    return tuple(vecs)


@dataclass(frozen=True)
class ComplexStructure:
    """Eigenstructure of a complex-domain tensor.

    ``plane_basis`` is a 2x3 array whose rows span the invariant plane
    (orthogonal complement of the left real eigenvector); ``block2`` is the
    projected 2x2 tensor on that basis; the dual axes are the major/minor
    axes of the elliptical orbit of its complex eigenvector.
    """

    lam_real: float
    v_real: np.ndarray
    plane_basis: np.ndarray
    block2: np.ndarray
    dual_major: np.ndarray
    dual_minor: np.ndarray
    eccentricity: float
    complex_pair: complex


def complex_structure(t, tol=SIGN_TOL) -> ComplexStructure:
    """Real eigenvector, invariant plane and dual-eigenvector axes of a
    tensor with complex eigenvalues.

    Raises NotComplexDomain if the deviator discriminant is >= -tol scaled.
    """
    t = _check_finite(t)
    a = deviator_part(t)
    nrm = float(magnitude(a))
    delta = float(-27.0 * det(a) ** 2 - 4.0 * minor(a) ** 3)
    if delta >= -tol * max(nrm, 1e-300) ** 6:
        raise NotComplexDomain("discriminant is not negative")
    lams = eigvals_from_pq(float(minor(a)), float(det(a)))
    lam_real = float(lams[0].real) + float(trace(t)) / 3.0

    v_real = _nullspace_vector(t - lam_real * np.eye(3))
    u_left = _nullspace_vector(t.T - lam_real * np.eye(3))

    # orthonormal basis of the T-invariant plane (complement of u_left)
    k = int(np.argmin(np.abs(u_left)))
    w1 = np.zeros(3)
    w1[k] = 1.0
    w1 = w1 - np.dot(w1, u_left) * u_left
    w1 /= np.linalg.norm(w1)
    w2 = np.cross(u_left, w1)
    w2 /= np.linalg.norm(w2)
    w = np.stack([w1, w2])
    block = w @ t @ w.T

    ar = 0.5 * (block[0, 0] + block[1, 1])
    b2 = float(np.linalg.det(block)) - ar * ar
    b = math.sqrt(max(b2, 0.0))
    # complex eigenvector z of the 2x2 block for eigenvalue ar + i b
    cand1 = np.array([block[0, 1], ar + 1j * b - block[0, 0]])
    cand2 = np.array([ar + 1j * b - block[1, 1], block[1, 0]])
    z = cand1 if np.linalg.norm(cand1) >= np.linalg.norm(cand2) else cand2
    m = np.stack([z.real, z.imag], axis=1)
    uu, ss, _ = np.linalg.svd(m)
    major2, minor2 = uu[:, 0], uu[:, 1]
    ratio = ss[1] / ss[0] if ss[0] > 0 else 1.0
    ecc = math.sqrt(max(1.0 - ratio * ratio, 0.0))

    return ComplexStructure(
        lam_real=lam_real,
        v_real=v_real,
        plane_basis=w,
        block2=block,
        dual_major=_unit_sign_convention(major2 @ w),
        dual_minor=_unit_sign_convention(minor2 @ w),
        eccentricity=ecc,
        complex_pair=complex(ar + 1j * b),
    )


# ---------------------------------------------------------------------------
# eigen decomposition variants


@dataclass(frozen=True)
class EigenDecomposition:
    """Tagged eigenstructure: kind is one of 'real_distinct', 'complex',
    'double_degenerate', 'triple_degenerate'."""

    kind: str
    eigenvalues: tuple
    v_major: np.ndarray | None = None
    v_medium: np.ndarray | None = None
    v_minor: np.ndarray | None = None
    complex_info: ComplexStructure | None = None
    lam_dominant: float | None = None
    lam_repeated: float | None = None
    v_dominant: np.ndarray | None = None
    v_repeated: np.ndarray | None = None


def eigen_decomposition(t, tol=SIGN_TOL) -> EigenDecomposition:
    t = _check_finite(t)
    a = deviator_part(t)
    nrm = float(magnitude(a))
    shift = float(trace(t)) / 3.0
    p = float(minor(a))
    q = float(det(a))
    delta = -27.0 * q * q - 4.0 * p * p * p
    scale6 = max(nrm, 1e-300) ** 6

    if abs(p) <= tol * nrm * nrm and abs(q) <= tol * nrm ** 3:
        v = _nullspace_vector(t - shift * np.eye(3))
        return EigenDecomposition(
            kind="triple_degenerate", eigenvalues=(shift, shift, shift),
            lam_dominant=shift, lam_repeated=shift, v_dominant=v, v_repeated=v,
        )
    if delta < -tol * scale6:
        cs = complex_structure(t, tol=tol)
        pair = cs.complex_pair
        return EigenDecomposition(
            kind="complex",
            eigenvalues=(cs.lam_real, pair, pair.conjugate()),
            complex_info=cs,
        )
    lams = np.sort(eigvals_from_pq(p, q).real)[::-1] + shift
    if delta > tol * scale6:
        v1, v2, v3 = real_eigenvectors(t, tol=tol)
        return EigenDecomposition(
            kind="real_distinct", eigenvalues=tuple(lams),
            v_major=v1, v_medium=v2, v_minor=v3,
        )
    # double degenerate: repeated pair is the closer one
    if lams[0] - lams[1] <= lams[1] - lams[2]:
        lam_rep = 0.5 * (lams[0] + lams[1])
        lam_dom = lams[2]
    else:
        lam_rep = 0.5 * (lams[1] + lams[2])
        lam_dom = lams[0]
    v_dom = _nullspace_vector(t - lam_dom * np.eye(3))
    v_rep = _nullspace_vector(t - lam_rep * np.eye(3))
    return EigenDecomposition(
        kind="double_degenerate", eigenvalues=tuple(lams),
        lam_dominant=lam_dom, lam_repeated=lam_rep,
        v_dominant=v_dom, v_repeated=v_rep,
    )


# ---------------------------------------------------------------------------
# classification


@dataclass(frozen=True)
class TensorClassification:
    domain: str  # 'real' | 'complex_inner' | 'complex_outer'
    anisotropy: str  # 'linear' | 'planar' | 'neutral'
    on_degenerate: bool
    on_balanced: bool
    on_neutral: bool
    triple_degenerate: bool
    mode: ModeTriple


def classify(t, tol=SIGN_TOL) -> TensorClassification:
    """Region classification of one tensor (computed on its deviator).

    Anisotropy follows the sign of det(deviator): positive is linear
    (middle / real eigenvalue pushes the dominant one positive), negative is
    planar, zero is neutral.  On the degenerate boundary the domain is
    reported as 'real'; on the balanced set p = 0 it is 'complex_inner'.
    """
    t = _check_finite(t)
    a = deviator_part(t)
    nrm = float(magnitude(a))
    p = float(minor(a))
    q = float(det(a))
    delta = -27.0 * q * q - 4.0 * p * p * p
    m = mode(a, tol=tol)

    tol_d = tol * max(nrm, 1e-300) ** 6
    on_degenerate = abs(delta) <= tol_d
    on_balanced = m.sign_p == 0
    on_neutral = m.sign_q == 0
    triple = not m.defined or nrm == 0.0
    if triple:
        on_degenerate = on_balanced = on_neutral = True

    if delta < -tol_d and not triple:
        domain = "complex_inner" if m.sign_p >= 0 else "complex_outer"
    else:
        domain = "real"

    if on_neutral:
        anisotropy = "neutral"
    else:
        anisotropy = "linear" if m.sign_q > 0 else "planar"

    return TensorClassification(
        domain=domain,
        anisotropy=anisotropy,
        on_degenerate=on_degenerate,
        on_balanced=on_balanced,
        on_neutral=on_neutral,
        triple_degenerate=triple,
        mode=m,
    )


DOMAIN_IDS = {"real": 0, "complex_outer": 1, "complex_inner": 2}


# ---------------------------------------------------------------------------
# eigenvalue space (hexagonal double cone)

# Hexagon vertices, counterclockwise from the top:
# real-neutral, linear-degenerate, linear-balanced, complex-neutral,
# planar-balanced, planar-degenerate.
_HEX_ANGLES = np.deg2rad(90.0 + 60.0 * np.arange(6))
_HEX_VERTS = np.stack([np.cos(_HEX_ANGLES), np.sin(_HEX_ANGLES)], axis=1)
HEX_VERTEX_LABELS = (
    "real_neutral",
    "linear_degenerate",
    "linear_balanced",
    "complex_neutral",
    "planar_balanced",
    "planar_degenerate",
)


@dataclass(frozen=True)
class EigenvalueSpacePoint:
    """Position of a tensor in the hexagonal double-cone model.

    ``border_xy`` is the point on the unit hexagon border (None at the
    apexes), ``height`` the isotropicity, and ``cone_xyz`` the embedded
    point with the hexagon shrunk by (1 - |height|).
    """

    border_xy: np.ndarray | None
    height: float
    cone_xyz: np.ndarray
    at_center: bool
    at_apex: bool
    angle: float | None


def _hexagon_point(mu, sign_p, sign_q):
    v = _HEX_VERTS
    if sign_p < 0:
        i0, i1, i2 = (0, 1, 2) if sign_q >= 0 else (0, 5, 4)
        if mu <= 1.0:
            t = mu
            a, b = v[i0], v[i1]
        else:
            t = 1.0 - 1.0 / mu
            a, b = v[i1], v[i2]
    elif sign_p > 0:
        i0, i1 = (3, 2) if sign_q >= 0 else (3, 4)
        t = mu / (1.0 + mu) if math.isfinite(mu) else 1.0
        a, b = v[i0], v[i1]
    else:  # balanced: mu = inf
        return v[2].copy() if sign_q >= 0 else v[4].copy()
    return a + t * (b - a)


def eigenvalue_space_coords(t, tol=SIGN_TOL) -> EigenvalueSpacePoint:
    """Map a tensor to the hexagonal double cone.

    Raises ZeroTensor for the zero tensor.  Tensors with a vanishing
    deviator map to the apexes; triple degenerate tensors map to the
    center of the hexagon at their isotropicity height.
    """
    t = _check_finite(t)
    mag = float(magnitude(t))
    if mag == 0.0:
        raise ZeroTensor("eigenvalue-space position undefined for zero tensor")
    eta = float(np.clip(trace(t) / (math.sqrt(3.0) * mag), -1.0, 1.0))
    a = deviator_part(t)
    if float(magnitude(a)) <= tol * mag:
        h = 1.0 if eta >= 0.0 else -1.0
        return EigenvalueSpacePoint(
            border_xy=None, height=h, cone_xyz=np.array([0.0, 0.0, h]),
            at_center=False, at_apex=True, angle=None,
        )
    m = mode(a, tol=tol)
    if not m.defined:
        return EigenvalueSpacePoint(
            border_xy=np.zeros(2), height=eta,
            cone_xyz=np.array([0.0, 0.0, eta]),
            at_center=True, at_apex=False, angle=None,
        )
    xy = _hexagon_point(m.mu, m.sign_p, m.sign_q)
    scale = 1.0 - abs(eta)
    return EigenvalueSpacePoint(
        border_xy=xy, height=eta,
        cone_xyz=np.array([xy[0] * scale, xy[1] * scale, eta]),
        at_center=False, at_apex=False,
        angle=float(math.atan2(xy[1], xy[0])),
    )
