"""Mode-space imaging of the scatterer from point-source data.

The pipeline projects the scattered point-source data onto the propagating
modes (one complex number per ordered pair of modes, the data matrix),
pairs the matrix with explicit mode-coefficient vectors of a tensor-valued
probe function, and scans a sampling point ``z`` over a lattice:

    I(z) = sum_axis | g_axis(z)^T  U  g_axis(z) |        (plain transpose)

``I(z)^2``, normalized to peak 1, is the exported image; it peaks where
the sampling point enters the scatterer.

The probe function on the measurement plane is the finite propagating-mode
sum (TE then TM blocks; overbars denote conjugates, ``z-`` the mirror of
``z`` through the terminating plate)

    Psi(y; z) = sum_m (-i) h_m/(2 lam_m^2) conj(TE_m)(y-)
                    [conj(TE_m)(z) - conj(TE_m)(z-)]^T
              + sum_n  i k^2/(2 mu_n^2 g_n) conj(TMt_n)(y-)
                    [conj(TMt_n)(z) - conj(TMt_n)(z-)
                     + conj(TMa_n)(z) + conj(TMa_n)(z-)]^T

and the point-spread field (the probe superposed with Green point sources,
restricted to one point ``x``) collapses by orthogonality to a closed
finite sum which is real valued and equals the propagating projection of
the real part of an axial Green-function derivative.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import modes, operators
from .errors import DimensionMismatch, EmptyLattice, ParseError
from .modes import ModeBasis, enumerate_modes
from .operators import MeasurementGrid, PointSourceData


# ---------------------------------------------------------------------------
# Probe-function building blocks
# ---------------------------------------------------------------------------


def probe_z_factors(basis: ModeBasis, zpts) -> tuple[np.ndarray, np.ndarray]:
    """Sampling-point factors of the probe function, per propagating mode.

    Returns ``(te, tm)`` with shapes ``(nz, M, 3)`` and ``(nz, N, 3)``:

    * ``te[..m..] = conj(TE_m)(z) - conj(TE_m)(z-)``
    * ``tm[..n..] = conj(TMt_n)(z) - conj(TMt_n)(z-)
      + conj(TMa_n)(z) + conj(TMa_n)(z-)``
    """
    prop = basis.propagating()
    zpts = modes._as_points(zpts)
    z3 = zpts[:, 2]
    te = modes.te_profiles(prop, zpts) * np.conj(modes.axial_phase_diff(prop.te_axial, z3))[:, :, None]
    tm = np.conj(
        modes.tm_vectors(
            prop,
            zpts,
            modes.axial_phase_diff(prop.tm_axial, z3),
            modes.axial_phase_sum(prop.tm_axial, z3),
        )
    )
    return te, tm


def _probe_y_factors(basis: ModeBasis, ypts) -> tuple[np.ndarray, np.ndarray]:
    """Measurement-plane factors ``conj(TE_m)(y-)`` and ``conj(TMt_n)(y-)``."""
    prop = basis.propagating()
    ypts = modes._as_points(ypts)
    y3 = ypts[:, 2]
    te = modes.te_profiles(prop, ypts) * np.conj(modes.axial_phase(prop.te_axial, y3, mirrored=True))[:, :, None]
    tm = np.conj(modes.tm_transverse_fields(prop, ypts, mirrored=True))
    return te, tm


def _probe_coefficients(basis: ModeBasis) -> tuple[np.ndarray, np.ndarray]:
    """Per-mode scalar weights of the probe function (TE, TM)."""
    prop = basis.propagating()
    te = -1j * prop.te_axial / (2.0 * prop.te_cut2)
    tm = 1j * prop.k**2 / (2.0 * prop.tm_cut2 * prop.tm_axial)
    return te, tm


def probe_matrix(basis: ModeBasis, y, z) -> np.ndarray:
    """Tensor-valued probe function at one plane point / sampling point pair."""
    te_y, tm_y = _probe_y_factors(basis, y)
    te_z, tm_z = probe_z_factors(basis, z)
    cte, ctm = _probe_coefficients(basis)
    out = np.einsum("m,mi,mj->ij", cte, te_y[0], te_z[0], optimize=True)
    out += np.einsum("m,mi,mj->ij", ctm, tm_y[0], tm_z[0], optimize=True)
    return out


def probe_density(basis: ModeBasis, grid: MeasurementGrid, z, axis: int) -> np.ndarray:
    """Probe column ``Psi(., z) e_axis`` sampled on the grid, ``(nn, 3)``."""
    te_y, tm_y = _probe_y_factors(basis, grid.nodes)
    te_z, tm_z = probe_z_factors(basis, z)
    cte, ctm = _probe_coefficients(basis)
    out = np.einsum("m,nmi,m->ni", cte, te_y, te_z[0, :, axis], optimize=True)
    out += np.einsum("m,nmi,m->ni", ctm, tm_y, tm_z[0, :, axis], optimize=True)
    return out


# ---------------------------------------------------------------------------
# Point-spread field
# ---------------------------------------------------------------------------


def psf_fields(basis: ModeBasis, x_star, zs) -> np.ndarray:
    """Closed-form point-spread field for many sampling points.

    ``out[iz, :, j]`` is the field at ``x_star`` of the probe column ``j``
    anchored at ``zs[iz]``; real valued up to exact floating-point
    cancellation.  Shape ``(nz, 3, 3)`` complex.
    """
    prop = basis.propagating()
    x_star = np.asarray(x_star, dtype=float)
    zs = modes._as_points(zs)
    x3 = x_star[2]
    te_x = modes.te_profiles(prop, x_star[None, :])[0] * modes.axial_phase_diff(prop.te_axial, x3)[0][:, None]
    tm_x = modes.tm_vectors(
        prop,
        x_star[None, :],
        modes.axial_phase_diff(prop.tm_axial, x3),
        modes.axial_phase_sum(prop.tm_axial, x3),
    )[0]
    te_z, tm_z = probe_z_factors(prop, zs)

    c = 1j / (2.0 * prop.te_axial * prop.te_cut2)
    d = -1j / (2.0 * prop.tm_axial * prop.tm_cut2)
    cte = -1j * c * prop.te_axial / 2.0
    ctm = 1j * d * prop.tm_axial / 2.0

    out = np.einsum("m,mi,zmj->zij", cte, te_x, te_z, optimize=True)
    out += np.einsum("m,mi,zmj->zij", ctm, tm_x, tm_z, optimize=True)
    return out


def psf_field(basis: ModeBasis, x_star, z) -> np.ndarray:
    """Point-spread field at one sampling point, ``(3,3)`` complex."""
    return psf_fields(basis, x_star, np.asarray(z, dtype=float)[None, :])[0]


def psf_vector(basis: ModeBasis, x_star, z, axis: int) -> np.ndarray:
    """Real 3-vector of the point-spread field for one probe column."""
    return psf_field(basis, x_star, z)[:, axis].real.copy()


# ---------------------------------------------------------------------------
# Mode-projection vectors and the data matrix
# ---------------------------------------------------------------------------


def probe_mode_vector(
    basis: ModeBasis,
    z,
    axis: int,
    method: str = "analytic",
    grid: MeasurementGrid | None = None,
) -> np.ndarray:
    """Mode projections of the probe column on the measurement plane.

    Entry ``j`` is the plane integral of the (unconjugated) mode-vector
    transpose against ``Psi(., z) e_axis``: TE modes fill the first ``M``
    slots, TM modes the remaining ``N``.  The analytic mode uses the
    orthogonality of the propagating modes, under which the plane phases
    cancel and entries collapse to

        TE:  (-i) h/2 * [conj(TE)(z) - conj(TE)(z-)]_axis
        TM:  (+i) g/2 * [conj(TMt)(z) - conj(TMt)(z-)
                         + conj(TMa)(z) + conj(TMa)(z-)]_axis

    The quadrature mode evaluates the integrals on a grid and exists as a
    cross-check; it requires ``grid``.
    """
    prop = basis.propagating()
    if method == "analytic":
        te_z, tm_z = probe_z_factors(prop, z)
        gte = (-1j * prop.te_axial / 2.0) * te_z[0, :, axis]
        gtm = (1j * prop.tm_axial / 2.0) * tm_z[0, :, axis]
        return np.concatenate([gte, gtm])
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    if grid is None:
        raise ValueError("quadrature method requires a grid")
    grid.check_nyquist(prop)
    dens = probe_density(prop, grid, z, axis)
    nodes = grid.nodes
    te_y = modes.te_fields(prop, nodes, mirrored=True)
    tm_y = modes.tm_transverse_fields(prop, nodes, mirrored=True) - modes.tm_axial_fields(
        prop, nodes, mirrored=True
    )
    gte = grid.weight * np.einsum("nmi,ni->m", te_y, dens, optimize=True)
    gtm = grid.weight * np.einsum("nmi,ni->m", tm_y, dens, optimize=True)
    return np.concatenate([gte, gtm])


@dataclass
class DataMatrix:
    """Mode-projected scattered data, ``(M+N) x (M+N)`` complex.

    Row index runs over the source-side modes, column index over the
    receiver-side modes (TE block first, then TM).  ``provenance`` records
    scene fingerprint, noise level, and seed where applicable.
    """

    values: np.ndarray
    basis: ModeBasis
    grid: MeasurementGrid
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        mn = self.basis.M + self.basis.N
        if self.values.shape != (mn, mn):
            raise DimensionMismatch(
                f"data matrix shape {self.values.shape} does not match M+N={mn}"
            )


def plane_projectors(basis: ModeBasis, grid: MeasurementGrid) -> np.ndarray:
    """Per-node projection vectors used to assemble the data matrix.

    ``(nn, M+N, 3)``: ``conj(TE_j)(y-)/lam_j^2`` for the TE block and
    ``(conj(TMt_j) - conj(TMa_j))(y-)/mu_j^2`` for the TM block.
    """
    prop = basis.propagating()
    nodes = grid.nodes
    te = modes.te_fields(prop, nodes, mirrored=True)
    tm = modes.tm_transverse_fields(prop, nodes, mirrored=True) - modes.tm_axial_fields(
        prop, nodes, mirrored=True
    )
    te = np.conj(te) / prop.te_cut2[None, :, None]
    tm = np.conj(tm) / prop.tm_cut2[None, :, None]
    return np.concatenate([te, tm], axis=1)


def assemble_data_matrix(data: PointSourceData, basis: ModeBasis) -> DataMatrix:
    """Two-stage mode projection of the point-source data.

    The data block is first contracted against the source-side projection
    vectors, then against the receiver-side vectors; both contractions are
    single complex matrix products, so the cost is
    ``O(nodes^2 * (M+N))`` per stage.
    """
    prop = basis.propagating()
    grid = data.grid
    if grid.spec != prop.spec or abs(data.k - prop.k) > 1e-12 * max(prop.k, 1.0):
        raise DimensionMismatch("point-source data and basis describe different guides")
    grid.check_nyquist(prop)

    nn = grid.n_nodes
    mn = prop.M + prop.N
    proj = plane_projectors(prop, grid).transpose(0, 2, 1).reshape(nn * 3, mn)
    block = data.values.transpose(0, 2, 1, 3).reshape(nn * 3, nn * 3)
    # stage 1: contract source side; stage 2: receiver side
    v = block @ proj
    u = (proj.T @ v).T * grid.weight**2
    meta = dict(data.scene_meta)
    meta.update({"noise_level": 0.0, "seed": None})
    return DataMatrix(np.ascontiguousarray(u), prop, grid, meta)


def add_noise(dm: DataMatrix, level: float, seed: int) -> DataMatrix:
    """Additive complex Gaussian noise, calibrated in Frobenius norm.

    ``U' = U + level * |U|_F / sqrt(2 (M+N)^2) * (G1 + i G2)`` with
    independent standard normal draws from the seeded generator, so the
    expected relative Frobenius perturbation equals ``level``.
    Deterministic per seed; ``level=0`` returns an exact copy.
    """
    if level < 0:
        raise ValueError("noise level must be nonnegative")
    values = dm.values.copy()
    if level > 0:
        mn = values.shape[0]
        rng = np.random.default_rng(seed)
        scale = level * np.linalg.norm(values) / math.sqrt(2.0 * mn * mn)
        values = values + scale * (
            rng.standard_normal((mn, mn)) + 1j * rng.standard_normal((mn, mn))
        )
    meta = dict(dm.provenance)
    meta.update({"noise_level": float(level), "seed": int(seed)})
    return DataMatrix(values, dm.basis, dm.grid, meta)


# ---------------------------------------------------------------------------
# Imaging function and sampled volumes
# ---------------------------------------------------------------------------


def imaging_value(dm: DataMatrix, z) -> float:
    """``I(z) = sum_axis | g_axis(z)^T U g_axis(z) |`` (no conjugation)."""
    total = 0.0
    for axis in range(3):
        g = probe_mode_vector(dm.basis, z, axis)
        total += abs(np.dot(g, dm.values @ g))
    return float(total)


class ImageLattice:
    """Rectilinear sampling lattice with uniform spacing per axis."""

    def __init__(self, x1, x2, x3):
        self.x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        self.x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        self.x3 = np.atleast_1d(np.asarray(x3, dtype=float))
        if min(self.x1.size, self.x2.size, self.x3.size) == 0:
            raise EmptyLattice("lattice must contain at least one node per axis")

    @staticmethod
    def _axis(start: float, stop: float, step: float) -> np.ndarray:
        if stop < start:
            raise EmptyLattice(f"axis range [{start}, {stop}] is empty")
        n = int(math.floor((stop - start) / step + 0.5)) + 1 if step > 0 else 1
        return start + step * np.arange(n)

    @classmethod
    def from_ranges(cls, r1, r2, r3) -> "ImageLattice":
        """Build from three ``(start, stop, step)`` triples."""
        return cls(cls._axis(*r1), cls._axis(*r2), cls._axis(*r3))

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.x1.size, self.x2.size, self.x3.size)

    @property
    def n_nodes(self) -> int:
        return self.x1.size * self.x2.size * self.x3.size

    def spacing(self) -> tuple[float, float, float]:
        def step(ax):
            return float(ax[1] - ax[0]) if ax.size > 1 else 1.0

        return (step(self.x1), step(self.x2), step(self.x3))

    def transverse_points(self, x3: float) -> np.ndarray:
        g1, g2 = np.meshgrid(self.x1, self.x2, indexing="ij")
        pts = np.empty((g1.size, 3))
        pts[:, 0] = g1.ravel()
        pts[:, 1] = g2.ravel()
        pts[:, 2] = x3
        return pts


@dataclass
class ImageVolume:
    """Sampled volume: ``values`` normalized to peak 1, ``raw`` unnormalized.

    For imaging runs ``raw`` holds ``I(z)`` and ``values`` holds
    ``I(z)^2 / max``; for point-spread runs ``raw`` holds the squared field
    magnitude summed over probe columns.
    """

    lattice: ImageLattice
    values: np.ndarray
    raw: np.ndarray | None = None
    label: str = "I2"


def _slice_map(fn, n_slices: int, threads: int):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, range(n_slices)))
    return [fn(i) for i in range(n_slices)]


def image_volume(dm: DataMatrix, lattice: ImageLattice, threads: int = 1) -> ImageVolume:
    """Evaluate the imaging function on a lattice and normalize its square.

    Parallelizes over axial slices; per-node values do not depend on the
    slicing, so results are independent of ``threads``.
    """
    basis = dm.basis
    u = dm.values
    n1, n2, n3 = lattice.shape
    raw = np.zeros((n1, n2, n3))

    cte = -1j * basis.te_axial[: basis.M] / 2.0
    ctm = 1j * basis.tm_axial[: basis.N] / 2.0

    def one_slice(iz: int):
        zpts = lattice.transverse_points(lattice.x3[iz])
        te_z, tm_z = probe_z_factors(basis, zpts)
        acc = np.zeros(zpts.shape[0])
        for axis in range(3):
            g = np.concatenate([cte * te_z[:, :, axis], ctm * tm_z[:, :, axis]], axis=1)
            acc += np.abs(np.einsum("zi,zi->z", g, g @ u, optimize=True))
        raw[:, :, iz] = acc.reshape(n1, n2)

    _slice_map(one_slice, n3, threads)
    sq = raw**2
    peak = sq.max()
    values = sq / peak if peak > 0 else sq
    return ImageVolume(lattice, values, raw)


def psf_volume(basis: ModeBasis, x_star, lattice: ImageLattice, threads: int = 1) -> ImageVolume:
    """Squared point-spread magnitude summed over probe columns, normalized."""
    prop = basis.propagating()
    n1, n2, n3 = lattice.shape
    raw = np.zeros((n1, n2, n3))

    def one_slice(iz: int):
        zpts = lattice.transverse_points(lattice.x3[iz])
        fields = psf_fields(prop, x_star, zpts)
        raw[:, :, iz] = (np.abs(fields) ** 2).sum(axis=(1, 2)).reshape(n1, n2)

    _slice_map(one_slice, n3, threads)
    peak = raw.max()
    values = raw / peak if peak > 0 else raw.copy()
    return ImageVolume(lattice, values, raw, label="psf2")


def local_maxima_2d(values: np.ndarray, threshold: float) -> list[tuple[int, int]]:
    """Grid-local maxima of a 2-D slice with value above the threshold.

    A node qualifies when its value is at least that of its (up to) eight
    neighbors and strictly above the threshold.
    """
    v = np.asarray(values)
    padded = np.full((v.shape[0] + 2, v.shape[1] + 2), -np.inf)
    padded[1:-1, 1:-1] = v
    peaks = []
    for i in range(v.shape[0]):
        for j in range(v.shape[1]):
            w = padded[i : i + 3, j : j + 3]
            if v[i, j] > threshold and v[i, j] >= w.max():
                peaks.append((i, j))
    return peaks


# ---------------------------------------------------------------------------
# Exports: data matrix container, CSV, legacy VTK structured points
# ---------------------------------------------------------------------------


def write_data_matrix(path, dm: DataMatrix):
    """Binary round-trip of the data matrix through the shared container."""
    sidecar = {"kind": "data_matrix", "provenance": dm.provenance}
    operators._write_container(path, dm.grid, dm.basis.k, dm.values, sidecar)


def read_data_matrix(path) -> DataMatrix:
    grid, k, flat, sidecar = operators._read_container(path)
    basis = enumerate_modes(grid.spec, k)
    mn = basis.M + basis.N
    if flat.size != mn * mn:
        raise ParseError(f"{path}: payload has {flat.size} entries, expected {mn * mn}")
    return DataMatrix(flat.reshape(mn, mn).copy(), basis, grid, sidecar.get("provenance", {}))


def write_volume_csv(path, vol: ImageVolume):
    """CSV export with header ``x1,x2,x3,value`` (normalized values)."""
    with open(path, "w") as f:
        f.write("x1,x2,x3,value\n")
        for i1, x1 in enumerate(vol.lattice.x1):
            for i2, x2 in enumerate(vol.lattice.x2):
                for i3, x3 in enumerate(vol.lattice.x3):
                    f.write(f"{x1:.17g},{x2:.17g},{x3:.17g},{vol.values[i1, i2, i3]:.17g}\n")


def read_volume_csv(path) -> ImageVolume:
    try:
        table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    except ValueError as exc:
        raise ParseError(f"{path}: {exc}") from exc
    if table.size == 0 or table.shape[1] != 4:
        raise ParseError(f"{path}: expected 4 columns x1,x2,x3,value")
    axes = [np.unique(table[:, i]) for i in range(3)]
    lattice = ImageLattice(*axes)
    if lattice.n_nodes != table.shape[0]:
        raise ParseError(f"{path}: rows do not form a complete lattice")
    idx = [np.searchsorted(axes[i], table[:, i]) for i in range(3)]
    values = np.zeros(lattice.shape)
    values[idx[0], idx[1], idx[2]] = table[:, 3]
    return ImageVolume(lattice, values)


def write_volume_vtk(path, vol: ImageVolume):
    """Legacy-VTK structured-points ASCII export of the normalized values."""
    n1, n2, n3 = vol.lattice.shape
    d1, d2, d3 = vol.lattice.spacing()
    with open(path, "w") as f:
        f.write("# vtk DataFile Version 3.0\n")
        f.write("wgimage volume\n")
        f.write("ASCII\n")
        f.write("DATASET STRUCTURED_POINTS\n")
        f.write(f"DIMENSIONS {n1} {n2} {n3}\n")
        f.write(f"ORIGIN {vol.lattice.x1[0]:.17g} {vol.lattice.x2[0]:.17g} {vol.lattice.x3[0]:.17g}\n")
        f.write(f"SPACING {d1:.17g} {d2:.17g} {d3:.17g}\n")
        f.write(f"POINT_DATA {n1 * n2 * n3}\n")
        f.write(f"SCALARS {vol.label} double 1\n")
        f.write("LOOKUP_TABLE default\n")
        for v in vol.values.ravel(order="F"):
            f.write(f"{v:.17g}\n")


def read_volume_vtk(path) -> ImageVolume:
    with open(path) as f:
        lines = [ln.strip() for ln in f]
    try:
        fields = {}
        data_start = None
        label = "I2"
        for i, ln in enumerate(lines):
            if ln.startswith(("DIMENSIONS", "ORIGIN", "SPACING", "POINT_DATA")):
                key, *vals = ln.split()
                fields[key] = [float(v) for v in vals]
            elif ln.startswith("SCALARS"):
                label = ln.split()[1]
            elif ln.startswith("LOOKUP_TABLE"):
                data_start = i + 1
                break
        n1, n2, n3 = (int(v) for v in fields["DIMENSIONS"])
        o = fields["ORIGIN"]
        s = fields["SPACING"]
        count = int(fields["POINT_DATA"][0])
        flat = np.array(
            [float(tok) for ln in lines[data_start:] for tok in ln.split()], dtype=float
        )
        if flat.size != count or count != n1 * n2 * n3:
            raise ParseError(f"{path}: value count mismatch")
        lattice = ImageLattice(
            o[0] + s[0] * np.arange(n1), o[1] + s[1] * np.arange(n2), o[2] + s[2] * np.arange(n3)
        )
        return ImageVolume(lattice, flat.reshape((n1, n2, n3), order="F"), label=label)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise ParseError(f"{path}: not a structured-points file ({exc})") from exc
