"""Forward scattering model and operator factorization machinery.

The scatterer is a voxel cloud with complex relative permittivity.  Point
sources and receivers sit on a uniform grid over one cross-section of the
guide (the measurement plane).  Scattered data is synthesized with the
volume-integral representation of the scattered field,

    E_s(x) = k^2 * sum_v vol_v * (eps_v - 1) * G(x, v) * E_total(v),

where the total field at the voxels is either the incident field (Born
approximation, the default) or the fixed point of the discrete
Lippmann-Schwinger iteration.  The iteration couples only voxel pairs on
distinct axial planes: the modal series has no meaning at coincident
planes, so same-plane coupling (including the self term) is excluded by
construction.

The module also implements the two operator halves of the data-operator
factorization

    (N g) x nu = conj( H* conj( T (H g) ) )

as quadrature sums, matching the synthesis path term by term, which makes
the factorization identity testable to near machine precision with Born
data and to iteration tolerance with the fixed-point model.

The measurement-plane normal is fixed as nu = (0, 0, -1), pointing away
from the region that contains the scatterer; every use here enters through
a double cross product, so the overall sign never reaches the data.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    InvalidGeometry,
    LSDiverged,
    ParseError,
    SeparationViolated,
)
from .green import GreenEvaluator
from .modes import ModeBasis, WaveguideSpec


def tangential(w: np.ndarray) -> np.ndarray:
    """Project field values onto the measurement plane: zero the axial part."""
    out = np.array(w, copy=True)
    out[..., 2] = 0.0
    return out


@dataclass(frozen=True)
class ForwardModel:
    """Forward-model choice: ``"born"`` or the fixed-point ``"ls"`` iteration."""

    kind: str = "born"
    tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if self.kind not in ("born", "ls"):
            raise InvalidGeometry(f"forward model kind must be 'born' or 'ls', got {self.kind!r}")

    @classmethod
    def born(cls) -> "ForwardModel":
        return cls("born")

    @classmethod
    def lippmann_schwinger(cls, tol: float = 1e-10, max_iter: int = 200) -> "ForwardModel":
        return cls("ls", tol, max_iter)


class Scene:
    """Voxelized scatterer: centers, volumes, and relative permittivity."""

    def __init__(self, centers, volumes, epsilon, label: str = ""):
        self.centers = np.asarray(centers, dtype=float).reshape(-1, 3)
        self.volumes = np.asarray(volumes, dtype=float).reshape(-1)
        self.epsilon = np.asarray(epsilon, dtype=np.complex128).reshape(-1)
        self.label = label
        n = self.centers.shape[0]
        if self.volumes.shape != (n,) or self.epsilon.shape != (n,):
            raise DimensionMismatch("centers, volumes, and epsilon must have matching length")
        if n and np.any(self.volumes <= 0):
            raise InvalidGeometry("voxel volumes must be positive")
        if n and np.any(self.epsilon.real <= 0):
            raise InvalidGeometry("relative permittivity must have positive real part")

    @classmethod
    def empty(cls) -> "Scene":
        return cls(np.zeros((0, 3)), np.zeros(0), np.zeros(0, dtype=complex))

    @property
    def n_voxels(self) -> int:
        return self.centers.shape[0]

    @property
    def contrast(self) -> np.ndarray:
        return self.epsilon - 1.0

    def validate_inside(self, spec: WaveguideSpec):
        c = self.centers
        if c.shape[0] == 0:
            return
        if (
            np.any(c[:, 0] <= 0)
            or np.any(c[:, 0] >= spec.a)
            or np.any(c[:, 1] <= 0)
            or np.any(c[:, 1] >= spec.b)
            or np.any(c[:, 2] >= 0)
        ):
            raise InvalidGeometry("all voxel centers must lie strictly inside the half guide")

    def fingerprint(self) -> str:
        """Stable content hash used for provenance metadata."""
        h = hashlib.sha1()
        for arr in (self.centers, self.volumes, self.epsilon):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()[:16]

    def __repr__(self):
        return f"Scene(n_voxels={self.n_voxels}, label={self.label!r})"


@dataclass(frozen=True)
class MeasurementGrid:
    """Uniform midpoint lattice on the measurement cross-section ``x3 = r``.

    Node ``(i1, i2)`` sits at ``((i1+0.5)a/n1, (i2+0.5)b/n2, r)`` and the
    flat node index is ``i1 * n2 + i2``.  The midpoint quadrature weight is
    ``a*b/(n1*n2)`` for every node.
    """

    spec: WaveguideSpec
    r: float
    n1: int
    n2: int

    def __post_init__(self):
        if self.r >= 0:
            raise InvalidGeometry("measurement plane must lie at negative x3")
        if self.n1 < 1 or self.n2 < 1:
            raise InvalidGeometry("grid must have at least one node per dimension")

    @property
    def n_nodes(self) -> int:
        return self.n1 * self.n2

    @property
    def weight(self) -> float:
        return self.spec.a * self.spec.b / (self.n1 * self.n2)

    @property
    def nodes(self) -> np.ndarray:
        x1 = (np.arange(self.n1) + 0.5) * self.spec.a / self.n1
        x2 = (np.arange(self.n2) + 0.5) * self.spec.b / self.n2
        g1, g2 = np.meshgrid(x1, x2, indexing="ij")
        pts = np.empty((self.n_nodes, 3))
        pts[:, 0] = g1.ravel()
        pts[:, 1] = g2.ravel()
        pts[:, 2] = self.r
        return pts

    def check_nyquist(self, basis: ModeBasis):
        """Resolution check for projections onto the propagating modes.

        Requires ``n >= 2 * max transverse index + 2`` per dimension so
        that products of two propagating-mode profiles are integrated
        exactly by the midpoint rule.
        """
        prop = basis.propagating()
        pairs = np.vstack([prop.te_pairs, prop.tm_pairs])
        if pairs.size == 0:
            return
        need1 = 2 * int(pairs[:, 0].max()) + 2
        need2 = 2 * int(pairs[:, 1].max()) + 2
        if self.n1 < need1 or self.n2 < need2:
            raise DimensionMismatch(
                f"grid {self.n1}x{self.n2} under-resolves the propagating modes; "
                f"need at least {need1}x{need2}"
            )


@dataclass
class PointSourceData:
    """Scattered point-source data for every ordered node pair of a grid.

    ``values[x, y, :, l]`` holds the scattered field at receiver node ``x``
    for a unit source at node ``y`` polarized along axis ``l``.
    """

    grid: MeasurementGrid
    k: float
    values: np.ndarray
    scene_meta: dict = field(default_factory=dict)

    def __post_init__(self):
        nn = self.grid.n_nodes
        if self.values.shape != (nn, nn, 3, 3):
            raise DimensionMismatch(
                f"expected values of shape {(nn, nn, 3, 3)}, got {self.values.shape}"
            )


# ---------------------------------------------------------------------------
# Operator halves
# ---------------------------------------------------------------------------


def _check_separation(evaluator: GreenEvaluator, plane_r: float, x3_values):
    x3_values = np.atleast_1d(x3_values)
    if x3_values.size == 0:
        return
    gap = np.min(np.abs(x3_values - plane_r))
    if gap < evaluator.min_axial_gap:
        raise SeparationViolated(
            f"axial separation {gap:.3e} from the measurement plane is below "
            f"the declared minimum {evaluator.min_axial_gap:.3e}"
        )


def herglotz_field(evaluator: GreenEvaluator, grid: MeasurementGrid, density, targets) -> np.ndarray:
    """Superpose plane point sources weighted by a tangential density.

    Quadrature version of ``x -> integral G(x, y) density(y) dS_y`` over the
    measurement plane; returns ``(n_targets, 3)`` complex.
    """
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    density = np.asarray(density, dtype=np.complex128).reshape(grid.n_nodes, 3)
    _check_separation(evaluator, grid.r, targets[:, 2])
    table = evaluator.half_table(targets, grid.nodes)
    return grid.weight * np.einsum("tnij,nj->ti", table, density, optimize=True)


def adjoint_field(evaluator: GreenEvaluator, grid: MeasurementGrid, scene: Scene, v) -> np.ndarray:
    """Adjoint of :func:`herglotz_field`: voxel values to a tangential field.

    Computes the transverse part of
    ``sum_v vol_v * conj(G(node, v)) v(v)`` at every grid node.
    """
    v = np.asarray(v, dtype=np.complex128).reshape(scene.n_voxels, 3)
    if scene.n_voxels == 0:
        return np.zeros((grid.n_nodes, 3), dtype=np.complex128)
    _check_separation(evaluator, grid.r, scene.centers[:, 2])
    table = evaluator.half_table(grid.nodes, scene.centers)
    w = np.einsum("nvij,vj->ni", np.conj(table), v * scene.volumes[:, None], optimize=True)
    return tangential(w)


def _coupling_table(evaluator: GreenEvaluator, scene: Scene) -> np.ndarray:
    """Voxel-to-voxel Green table for the fixed-point iteration.

    Pairs on (nearly) coincident axial planes do not couple; their entries
    are zero.  The diagonal is zero as a special case of that rule.
    """
    n = scene.n_voxels
    table = np.zeros((n, n, 3, 3), dtype=np.complex128)
    x3 = scene.centers[:, 2]
    gap = max(evaluator.min_axial_gap, np.finfo(float).tiny)
    ii, jj = np.nonzero(np.abs(x3[:, None] - x3[None, :]) >= gap)
    if ii.size:
        table[ii, jj] = evaluator.half_pairs(scene.centers[ii], scene.centers[jj])
    return table


def total_field(evaluator: GreenEvaluator, scene: Scene, incident, model: ForwardModel):
    """Total field at the voxels for given incident values.

    ``incident`` has shape ``(n_voxels, 3)`` or ``(n_voxels, 3, nrhs)``.
    Returns ``(total, residual)`` where ``residual`` is the achieved
    relative fixed-point residual (0 for the Born model).  Raises
    :class:`LSDiverged` when the iteration fails to reach tolerance.
    """
    incident = np.asarray(incident, dtype=np.complex128)
    if model.kind == "born" or scene.n_voxels == 0:
        return incident.copy(), 0.0

    squeeze = incident.ndim == 2
    w = incident[..., None] if squeeze else incident
    k2tau_vol = (evaluator.basis.k**2) * scene.contrast * scene.volumes
    table = _coupling_table(evaluator, scene) * k2tau_vol[None, :, None, None]

    def apply(u):
        return np.einsum("vwij,wjs->vis", table, u, optimize=True)

    inc_norm = np.linalg.norm(w)
    if inc_norm == 0:
        return incident.copy(), 0.0
    u = w.copy()
    residual = np.inf
    for _ in range(model.max_iter):
        nxt = w + apply(u)
        residual = np.linalg.norm(nxt - u) / inc_norm
        u = nxt
        if residual <= model.tol:
            break
    else:
        raise LSDiverged(
            f"fixed-point iteration stalled at residual {residual:.3e} "
            f"after {model.max_iter} iterations",
            residual=float(residual),
            iterations=model.max_iter,
        )
    return (u[..., 0] if squeeze else u), float(residual)


def contrast_current(evaluator: GreenEvaluator, scene: Scene, incident, model: ForwardModel) -> np.ndarray:
    """Induced current ``k^2 (eps - 1) * total_field`` per voxel."""
    total, _ = total_field(evaluator, scene, incident, model)
    tau = (evaluator.basis.k**2) * scene.contrast
    return total * tau[:, None] if total.ndim == 2 else total * tau[:, None, None]


def synthesize_data(
    evaluator: GreenEvaluator, scene: Scene, grid: MeasurementGrid, model: ForwardModel
) -> PointSourceData:
    """Scattered data for unit point sources at every grid node.

    For each source node and Cartesian polarization, the incident field on
    the voxels is a Green column, the total field follows from the chosen
    model, and the scattered field is radiated back to every receiver
    node.  Deterministic given its inputs.
    """
    k = evaluator.basis.k
    nn = grid.n_nodes
    meta = {"scene": scene.fingerprint(), "label": scene.label, "model": model.kind}
    if scene.n_voxels == 0:
        return PointSourceData(grid, k, np.zeros((nn, nn, 3, 3), dtype=np.complex128), meta)

    wavelength = 2 * np.pi / k
    gap = np.min(np.abs(scene.centers[:, 2] - grid.r))
    if gap < wavelength:
        raise SeparationViolated(
            f"scene sits {gap:.3f} from the measurement plane; need at least "
            f"one wavelength ({wavelength:.3f})"
        )

    recv = evaluator.half_table(grid.nodes, scene.centers)  # (nn, nv, 3, 3)
    src = evaluator.half_table(scene.centers, grid.nodes)  # (nv, nn, 3, 3)

    nv = scene.n_voxels
    incident = src.transpose(0, 2, 1, 3).reshape(nv, 3, nn * 3)
    total, _ = total_field(evaluator, scene, incident, model)
    k2tau_vol = (k**2) * scene.contrast * scene.volumes
    scattered = np.einsum("xvij,vjs->xis", recv * k2tau_vol[None, :, None, None], total, optimize=True)
    values = scattered.reshape(nn, 3, nn, 3).transpose(0, 2, 1, 3)
    return PointSourceData(grid, k, np.ascontiguousarray(values), meta)


def apply_data_operator(data: PointSourceData, density) -> np.ndarray:
    """Quadrature data operator: density to superposed scattered trace.

    Returns the (pre-cross-product) field ``sum_y w * U_s(x, y) g(y)`` at
    every receiver node; callers take the tangential part as needed.
    """
    density = np.asarray(density, dtype=np.complex128).reshape(data.grid.n_nodes, 3)
    return data.grid.weight * np.einsum("xyil,yl->xi", data.values, density, optimize=True)


def factorization_residual(
    evaluator: GreenEvaluator,
    scene: Scene,
    grid: MeasurementGrid,
    model: ForwardModel,
    density,
    data: PointSourceData | None = None,
) -> float:
    """Relative mismatch of the data-operator factorization for one density.

    Left side: synthesized data applied to the density, tangential part.
    Right side: ``conj(H* conj(T (H density)))`` with the same forward
    model.  Returns ``|lhs - rhs| / |lhs|`` over all grid nodes (defined
    as 0 for a vanishing left side).
    """
    if data is None:
        data = synthesize_data(evaluator, scene, grid, model)
    lhs = tangential(apply_data_operator(data, density))

    incident = herglotz_field(evaluator, grid, density, scene.centers) if scene.n_voxels else np.zeros((0, 3), dtype=complex)
    current = contrast_current(evaluator, scene, incident, model)
    rhs = np.conj(adjoint_field(evaluator, grid, scene, np.conj(current)))

    denom = np.linalg.norm(lhs)
    if denom == 0:
        return 0.0
    return float(np.linalg.norm(lhs - rhs) / denom)


# ---------------------------------------------------------------------------
# Binary container ("WGUS"): point-source data and mode-space data matrices
# ---------------------------------------------------------------------------

_MAGIC = b"WGUS"
_VERSION = 1
_HEADER = struct.Struct("<4sI6d")


def _write_container(path, grid: MeasurementGrid, k: float, payload: np.ndarray, sidecar: dict):
    """Write header + row-major complex128 payload, plus a JSON sidecar."""
    payload = np.ascontiguousarray(payload, dtype=np.complex128)
    header = _HEADER.pack(
        _MAGIC, _VERSION, float(grid.n1), float(grid.n2), grid.r, grid.spec.a, grid.spec.b, k
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(payload.tobytes())
    with open(str(path) + ".json", "w") as f:
        json.dump(sidecar, f, indent=2, sort_keys=True)
        f.write("\n")


def _read_container(path):
    with open(path, "rb") as f:
        raw = f.read()
    if len(raw) < _HEADER.size:
        raise ParseError(f"{path}: truncated header")
    magic, version, n1, n2, r, a, b, k = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise ParseError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise ParseError(f"{path}: unsupported version {version}")
    grid = MeasurementGrid(WaveguideSpec(a, b), r, int(n1), int(n2))
    flat = np.frombuffer(raw[_HEADER.size :], dtype=np.complex128)
    try:
        with open(str(path) + ".json") as f:
            sidecar = json.load(f)
    except FileNotFoundError:
        sidecar = {}
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}.json: {exc}") from exc
    return grid, k, flat, sidecar


def write_point_source_data(path, data: PointSourceData):
    sidecar = {"kind": "point_source", "scene": data.scene_meta}
    _write_container(path, data.grid, data.k, data.values, sidecar)


def read_point_source_data(path) -> PointSourceData:
    grid, k, flat, sidecar = _read_container(path)
    nn = grid.n_nodes
    if flat.size != nn * nn * 9:
        raise ParseError(f"{path}: payload has {flat.size} entries, expected {nn * nn * 9}")
    values = flat.reshape(nn, nn, 3, 3).copy()
    return PointSourceData(grid, k, values, sidecar.get("scene", {}))
