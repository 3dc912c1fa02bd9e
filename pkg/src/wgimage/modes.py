"""Vector mode families of a rectangular waveguide.

The guide occupies ``(0,a) x (0,b) x (-inf, 0]`` with perfectly conducting
walls.  Two families of transverse eigenfunctions live on the cross-section:

* cosine family  ``u(x1,x2) = cos(p1*pi*x1/a) * cos(p2*pi*x2/b)``  with
  cutoff ``lam**2 = (p1*pi/a)**2 + (p2*pi/b)**2``  (TE modes, pair != (0,0)),
* sine family    ``v(x1,x2) = sin(p1*pi*x1/a) * sin(p2*pi*x2/b)``  with
  cutoff ``mu**2`` of the same form  (TM modes, p1,p2 >= 1).

Eigenfunctions are normalized to unit L2 norm on the cross-section, so the
discrete orthogonality constants quoted throughout the package
(``lam**2`` for the TE family, ``mu**2 * g**2 / k**2`` for the TM family)
hold without area factors.

The vector fields evaluated here are, with ``h = sqrt(k^2 - lam^2)`` and
``g = sqrt(k^2 - mu^2)`` on the branch with nonnegative imaginary part:

* TE field            ``(d2 u, -d1 u, 0) * exp(i h x3)``
* TM transverse field ``(i g / k) * (d1 v, d2 v, 0) * exp(i g x3)``
* TM axial field      ``(0, 0, mu^2 v / k) * exp(i g x3)``

A mode propagates iff its cutoff lies below the wavenumber; evanescent
modes decay like ``exp(-|Im axial| * distance)`` along the axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CutoffResonance, FamilyMismatch, InvalidGeometry

TE = "TE"
TM = "TM"

#: field kinds accepted by :func:`eval_mode_field`
FIELD_KINDS = ("te", "tm_transverse", "tm_axial")


@dataclass(frozen=True)
class WaveguideSpec:
    """Cross-section extents of the guide, ``(0,a) x (0,b)``."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise InvalidGeometry(f"cross-section extents must be positive, got a={self.a}, b={self.b}")


@dataclass(frozen=True)
class EvanescentPolicy:
    """Controls how many evanescent modes a basis retains.

    A mode with decay rate ``q = |Im axial|`` is kept while
    ``exp(-q * min_axial_gap) >= decay_floor``, where ``min_axial_gap`` is
    the smallest axial source-observer separation the caller declares.
    At most ``max_per_family`` modes are kept per family (propagating modes
    are never dropped).
    """

    min_axial_gap: float = math.inf
    decay_floor: float = 1e-12
    max_per_family: int = 5000

    def __post_init__(self):
        if not (self.min_axial_gap > 0):
            raise InvalidGeometry("min_axial_gap must be positive")
        if not (0 < self.decay_floor < 1):
            raise InvalidGeometry("decay_floor must lie in (0, 1)")

    @classmethod
    def propagating_only(cls) -> "EvanescentPolicy":
        """Policy that retains no evanescent modes at all."""
        return cls(min_axial_gap=math.inf)

    @classmethod
    def for_gap(cls, min_axial_gap: float, **kwargs) -> "EvanescentPolicy":
        return cls(min_axial_gap=min_axial_gap, **kwargs)

    @property
    def max_decay_rate(self) -> float:
        """Largest retained ``|Im axial|`` implied by the decay floor."""
        if math.isinf(self.min_axial_gap):
            return 0.0
        return -math.log(self.decay_floor) / self.min_axial_gap


@dataclass(frozen=True)
class ModeIndex:
    """One enumerated mode.

    ``linear`` is the ordinal of the mode inside its family after sorting
    by nondecreasing cutoff (ties broken lexicographically by pair).
    """

    family: str
    pair: tuple[int, int]
    linear: int
    cutoff: float
    axial: complex
    propagating: bool


def cutoff_tolerance(k: float) -> float:
    """Resonance guard band around each cutoff: ``1e-12 * max(k, 1)``."""
    return 1e-12 * max(k, 1.0)


def axial_wavenumber(k: float, cutoff: float) -> complex:
    """``sqrt(k^2 - cutoff^2)`` on the branch with ``Im >= 0``.

    Purely real below cutoff, purely imaginary above.  Raises
    :class:`CutoffResonance` when ``|k - cutoff|`` falls inside the guard
    band, where the coefficient ``1/axial`` of the modal series blows up.
    """
    if k <= 0:
        raise InvalidGeometry(f"wavenumber must be positive, got {k}")
    if cutoff < 0:
        raise InvalidGeometry(f"cutoff must be nonnegative, got {cutoff}")
    if abs(k - cutoff) <= cutoff_tolerance(k):
        raise CutoffResonance(f"wavenumber {k} coincides with cutoff {cutoff}")
    if cutoff < k:
        return complex(math.sqrt((k - cutoff) * (k + cutoff)), 0.0)
    return complex(0.0, math.sqrt((cutoff - k) * (cutoff + k)))


def mirror_point(p):
    """Reflect through the terminating plate: ``(x1,x2,x3) -> (x1,x2,-x3)``.

    Accepts a single point or an ``(..., 3)`` array; involutive.
    """
    q = np.array(p, dtype=float, copy=True)
    q[..., 2] = -q[..., 2]
    return q


def transverse_normalizer(mode: ModeIndex, spec: WaveguideSpec) -> float:
    """Squared L2 norm of the unnormalized trigonometric eigenfunction.

    ``integral of u^2 (or v^2) over the cross-section = a*b*g1*g2`` with
    ``gi = 1`` when the index is 0 and ``1/2`` otherwise.
    """
    return _pair_normalizer(mode.pair, spec)


def _pair_normalizer(pair: tuple[int, int], spec: WaveguideSpec) -> float:
    g1 = 1.0 if pair[0] == 0 else 0.5
    g2 = 1.0 if pair[1] == 0 else 0.5
    return spec.a * spec.b * g1 * g2


def _enumerate_family(spec: WaveguideSpec, k: float, cut_max: float, family: str):
    """All (p1, p2) pairs of one family with cutoff <= cut_max, sorted."""
    lo = 0 if family == TE else 1
    p1_max = int(math.floor(cut_max * spec.a / math.pi)) + 1
    p2_max = int(math.floor(cut_max * spec.b / math.pi)) + 1
    tol = cutoff_tolerance(k)
    entries = []
    for p1 in range(lo, p1_max + 1):
        for p2 in range(lo, p2_max + 1):
            if family == TE and p1 == 0 and p2 == 0:
                continue  # the TE field vanishes identically for (0,0)
            cut = math.hypot(p1 * math.pi / spec.a, p2 * math.pi / spec.b)
            if abs(k - cut) <= tol:
                raise CutoffResonance(
                    f"wavenumber {k} resonates with {family} cutoff of pair ({p1},{p2})"
                )
            if cut > cut_max:
                continue
            entries.append((cut, p1, p2))
    entries.sort()
    return entries


def enumerate_modes(
    spec: WaveguideSpec, k: float, policy: EvanescentPolicy | None = None
) -> "ModeBasis":
    """Enumerate all propagating modes plus evanescent modes per policy.

    Modes of each family are sorted by nondecreasing cutoff with
    lexicographic tie-break on the index pair, which makes the ordering
    deterministic across runs.
    """
    if not (k > 0):
        raise InvalidGeometry(f"wavenumber must be positive, got {k}")
    if policy is None:
        policy = EvanescentPolicy.propagating_only()
    q_max = policy.max_decay_rate
    cut_max = math.sqrt(k * k + q_max * q_max)

    families = {}
    for family in (TE, TM):
        entries = _enumerate_family(spec, k, cut_max, family)
        n_prop = sum(1 for cut, _, _ in entries if cut < k)
        keep = max(policy.max_per_family, n_prop)
        entries = entries[:keep]
        modes = [
            ModeIndex(
                family=family,
                pair=(p1, p2),
                linear=i,
                cutoff=cut,
                axial=axial_wavenumber(k, cut),
                propagating=cut < k,
            )
            for i, (cut, p1, p2) in enumerate(entries)
        ]
        families[family] = modes

    return ModeBasis(spec, k, families[TE], families[TM], policy)


class ModeBasis:
    """Enumerated and sorted mode families with precomputed arrays.

    The propagating modes occupy the leading ``M`` (TE) and ``N`` (TM)
    slots of each family, a consequence of the cutoff ordering.
    """

    def __init__(self, spec, k, te_modes, tm_modes, policy):
        self.spec = spec
        self.k = float(k)
        self.te_modes = list(te_modes)
        self.tm_modes = list(tm_modes)
        self.policy = policy
        self.M = sum(1 for m in self.te_modes if m.propagating)
        self.N = sum(1 for m in self.tm_modes if m.propagating)
        self._build_arrays()

    def _build_arrays(self):
        a, b = self.spec.a, self.spec.b

        def pack(modes):
            pairs = np.array([m.pair for m in modes], dtype=np.int64).reshape(-1, 2)
            alpha = pairs * np.array([math.pi / a, math.pi / b])
            cut2 = (alpha**2).sum(axis=1)
            axial = np.array([m.axial for m in modes], dtype=np.complex128)
            rnorm = np.array(
                [1.0 / math.sqrt(_pair_normalizer(m.pair, self.spec)) for m in modes]
            )
            return pairs, alpha, cut2, axial, rnorm

        self.te_pairs, self.te_alpha, self.te_cut2, self.te_axial, self.te_rnorm = pack(
            self.te_modes
        )
        self.tm_pairs, self.tm_beta, self.tm_cut2, self.tm_axial, self.tm_rnorm = pack(
            self.tm_modes
        )

    @property
    def n_te(self) -> int:
        return len(self.te_modes)

    @property
    def n_tm(self) -> int:
        return len(self.tm_modes)

    @property
    def n_propagating(self) -> int:
        return self.M + self.N

    def propagating(self) -> "ModeBasis":
        """View of this basis restricted to the propagating modes."""
        if self.n_te == self.M and self.n_tm == self.N:
            return self
        return ModeBasis(
            self.spec,
            self.k,
            self.te_modes[: self.M],
            self.tm_modes[: self.N],
            EvanescentPolicy.propagating_only(),
        )

    def __repr__(self):
        return (
            f"ModeBasis(a={self.spec.a}, b={self.spec.b}, k={self.k}, "
            f"M={self.M}, N={self.N}, retained={self.n_te}+{self.n_tm})"
        )


# ---------------------------------------------------------------------------
# Vectorized evaluation over points and modes
# ---------------------------------------------------------------------------


def _as_points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[-1] != 3:
        raise InvalidGeometry(f"points must have 3 components, got shape {pts.shape}")
    return pts


def te_profiles(basis: ModeBasis, points) -> np.ndarray:
    """Transverse TE vectors ``(d2 u, -d1 u, 0)`` (normalized), real valued.

    Returns ``(npts, n_te, 3)``.
    """
    pts = _as_points(points)
    a1 = basis.te_alpha[:, 0]
    a2 = basis.te_alpha[:, 1]
    t1 = np.multiply.outer(pts[:, 0], a1)
    t2 = np.multiply.outer(pts[:, 1], a2)
    out = np.zeros((pts.shape[0], basis.n_te, 3))
    out[:, :, 0] = -a2 * np.cos(t1) * np.sin(t2) * basis.te_rnorm
    out[:, :, 1] = a1 * np.sin(t1) * np.cos(t2) * basis.te_rnorm
    return out


def tm_grad_profiles(basis: ModeBasis, points) -> np.ndarray:
    """Transverse gradients ``(d1 v, d2 v, 0)`` (normalized), ``(npts, n_tm, 3)``."""
    pts = _as_points(points)
    b1 = basis.tm_beta[:, 0]
    b2 = basis.tm_beta[:, 1]
    t1 = np.multiply.outer(pts[:, 0], b1)
    t2 = np.multiply.outer(pts[:, 1], b2)
    out = np.zeros((pts.shape[0], basis.n_tm, 3))
    out[:, :, 0] = b1 * np.cos(t1) * np.sin(t2) * basis.tm_rnorm
    out[:, :, 1] = b2 * np.sin(t1) * np.cos(t2) * basis.tm_rnorm
    return out


def tm_scalar_profiles(basis: ModeBasis, points) -> np.ndarray:
    """Normalized sine eigenfunctions ``v`` as ``(npts, n_tm)``."""
    pts = _as_points(points)
    t1 = np.multiply.outer(pts[:, 0], basis.tm_beta[:, 0])
    t2 = np.multiply.outer(pts[:, 1], basis.tm_beta[:, 1])
    return np.sin(t1) * np.sin(t2) * basis.tm_rnorm


def axial_phase(axial: np.ndarray, x3, mirrored: bool = False) -> np.ndarray:
    """``exp(i*axial*x3)``, or its mirror ``exp(-i*axial*x3)``.

    The oscillation comes from one shared cos/sin pair, so the mirrored
    phase is the exact conjugate for propagating (real) axial wavenumbers;
    the decay of evanescent modes is a plain real exponential, which avoids
    the cosh-sinh cancellation of evaluating tiny phases trigonometrically.
    Returns ``(npts, nmodes)``.
    """
    x3 = np.atleast_1d(np.asarray(x3, dtype=float))
    th_r = np.multiply.outer(x3, axial.real)
    th_i = np.multiply.outer(x3, axial.imag)
    c, s = np.cos(th_r), np.sin(th_r)
    if mirrored:
        return np.exp(th_i) * (c - 1j * s)
    return np.exp(-th_i) * (c + 1j * s)


def axial_phase_diff(axial: np.ndarray, x3) -> np.ndarray:
    """``exp(i*axial*x3) - exp(-i*axial*x3) = 2i sin(axial*x3)``."""
    return 2j * np.sin(np.multiply.outer(np.atleast_1d(np.asarray(x3, dtype=float)), axial))


def axial_phase_sum(axial: np.ndarray, x3) -> np.ndarray:
    """``exp(i*axial*x3) + exp(-i*axial*x3) = 2 cos(axial*x3)``."""
    return 2 * np.cos(np.multiply.outer(np.atleast_1d(np.asarray(x3, dtype=float)), axial))


def tm_vectors(basis: ModeBasis, points, transverse_phase, axial_phase_) -> np.ndarray:
    """Assemble TM vector fields from independently phased parts.

    ``transverse_phase`` scales ``(i g / k) * (d1 v, d2 v, 0)`` and
    ``axial_phase_`` scales ``(0, 0, mu^2 v / k)``; both are ``(npts, n_tm)``.
    Any combination of a field with its mirror is reachable this way.
    """
    pts = _as_points(points)
    grad = tm_grad_profiles(basis, pts)
    scal = tm_scalar_profiles(basis, pts)
    k = basis.k
    out = np.empty((pts.shape[0], basis.n_tm, 3), dtype=np.complex128)
    tcoef = (1j * basis.tm_axial / k) * transverse_phase
    out[:, :, 0] = grad[:, :, 0] * tcoef
    out[:, :, 1] = grad[:, :, 1] * tcoef
    out[:, :, 2] = scal * (basis.tm_cut2 / k) * axial_phase_
    return out


def te_fields(basis: ModeBasis, points, mirrored: bool = False) -> np.ndarray:
    """TE fields at points (or their mirrors), ``(npts, n_te, 3)`` complex."""
    pts = _as_points(points)
    prof = te_profiles(basis, pts)
    ph = axial_phase(basis.te_axial, pts[:, 2], mirrored=mirrored)
    return prof * ph[:, :, None]


def tm_transverse_fields(basis: ModeBasis, points, mirrored: bool = False) -> np.ndarray:
    pts = _as_points(points)
    ph = axial_phase(basis.tm_axial, pts[:, 2], mirrored=mirrored)
    zero = np.zeros_like(ph)
    return tm_vectors(basis, pts, ph, zero)


def tm_axial_fields(basis: ModeBasis, points, mirrored: bool = False) -> np.ndarray:
    pts = _as_points(points)
    ph = axial_phase(basis.tm_axial, pts[:, 2], mirrored=mirrored)
    zero = np.zeros_like(ph)
    return tm_vectors(basis, pts, zero, ph)


def eval_mode_field(mode: ModeIndex, spec: WaveguideSpec, point, kind: str) -> np.ndarray:
    """Evaluate one normalized vector mode field at one point.

    ``kind`` is one of ``"te"`` (TE family), ``"tm_transverse"`` or
    ``"tm_axial"`` (TM family).  The axial factor ``exp(i*axial*x3)`` is
    included.  Raises :class:`FamilyMismatch` when the kind does not match
    the mode family.
    """
    if kind not in FIELD_KINDS:
        raise FamilyMismatch(f"unknown field kind {kind!r}, expected one of {FIELD_KINDS}")
    want_family = TE if kind == "te" else TM
    if mode.family != want_family:
        raise FamilyMismatch(f"field kind {kind!r} is not defined for {mode.family} modes")

    x1, x2, x3 = (float(c) for c in np.asarray(point, dtype=float))
    p1, p2 = mode.pair
    rnorm = 1.0 / math.sqrt(_pair_normalizer(mode.pair, spec))
    a1, a2 = p1 * math.pi / spec.a, p2 * math.pi / spec.b
    phase = np.exp(1j * mode.axial * x3)
    if kind == "te":
        vec = np.array(
            [-a2 * math.cos(a1 * x1) * math.sin(a2 * x2),
             a1 * math.sin(a1 * x1) * math.cos(a2 * x2),
             0.0]
        )
        return vec * rnorm * phase
    k = math.sqrt(abs(mode.cutoff**2 + mode.axial**2))
    if kind == "tm_transverse":
        vec = np.array(
            [a1 * math.cos(a1 * x1) * math.sin(a2 * x2),
             a2 * math.sin(a1 * x1) * math.cos(a2 * x2),
             0.0]
        )
        return vec * (1j * mode.axial / k) * rnorm * phase
    vec = np.array([0.0, 0.0, mode.cutoff**2 * math.sin(a1 * x1) * math.sin(a2 * x2) / k])
    return vec * rnorm * phase
