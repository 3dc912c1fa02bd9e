"""Config-driven run description: JSON in, validated RunConfig out.

Scenes are described as lists of primitive shapes (box, ball, cylinder,
l_shape), each with its own complex permittivity, and voxelized
deterministically: voxel centers live on the global lattice
``((i+1/2)p, (j+1/2)p, -(k+1/2)p)`` of the stated pitch ``p``, and a voxel
belongs to a shape iff its center does.  Overlaps resolve in favor of the
earliest shape in the list.

Validation reports the dotted path of the offending field, e.g.
``scene.shapes[0].radius``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import CutoffResonance, ParseError, ValidationError
from .imaging import ImageLattice
from .modes import EvanescentPolicy, ModeBasis, WaveguideSpec, enumerate_modes
from .operators import ForwardModel, MeasurementGrid, Scene


# ---------------------------------------------------------------------------
# Shape primitives
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Ball:
    center: tuple[float, float, float]
    radius: float
    epsilon: complex

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = pts - np.asarray(self.center)
        return (d**2).sum(axis=1) < self.radius**2

    def bounds(self):
        c, r = np.asarray(self.center), self.radius
        return c - r, c + r


@dataclass(frozen=True)
class Box:
    center: tuple[float, float, float]
    half_widths: tuple[float, float, float]
    epsilon: complex

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = np.abs(pts - np.asarray(self.center))
        return np.all(d < np.asarray(self.half_widths), axis=1)

    def bounds(self):
        c, h = np.asarray(self.center), np.asarray(self.half_widths)
        return c - h, c + h


@dataclass(frozen=True)
class Cylinder:
    """Circular cylinder with axis along x3."""

    center: tuple[float, float, float]
    radius: float
    half_height: float
    epsilon: complex

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = pts - np.asarray(self.center)
        return ((d[:, :2] ** 2).sum(axis=1) < self.radius**2) & (
            np.abs(d[:, 2]) < self.half_height
        )

    def bounds(self):
        c = np.asarray(self.center)
        lo = c - [self.radius, self.radius, self.half_height]
        hi = c + [self.radius, self.radius, self.half_height]
        return lo, hi


@dataclass(frozen=True)
class LShape:
    """Square footprint of full width ``2*half_width`` missing one quadrant.

    The missing quadrant is ``x1 < c1 and x2 > c2``; thickness along x3 is
    ``2*half_thickness``.
    """

    center: tuple[float, float, float]
    half_width: float
    half_thickness: float
    epsilon: complex

    def contains(self, pts: np.ndarray) -> np.ndarray:
        d = pts - np.asarray(self.center)
        inside_box = (
            (np.abs(d[:, 0]) < self.half_width)
            & (np.abs(d[:, 1]) < self.half_width)
            & (np.abs(d[:, 2]) < self.half_thickness)
        )
        in_missing = (d[:, 0] < 0) & (d[:, 1] > 0)
        return inside_box & ~in_missing

    def bounds(self):
        c = np.asarray(self.center)
        h = np.array([self.half_width, self.half_width, self.half_thickness])
        return c - h, c + h


def voxelize(shapes, pitch: float, spec: WaveguideSpec) -> Scene:
    """Scene from shape primitives on the global pitch lattice."""
    if not shapes:
        return Scene.empty()
    lows = np.vstack([s.bounds()[0] for s in shapes])
    highs = np.vstack([s.bounds()[1] for s in shapes])
    lo, hi = lows.min(axis=0), highs.max(axis=0)

    def axis_indices(low, high, negative=False):
        if negative:
            # centers at -(i+1/2)*pitch
            i0 = max(0, int(math.floor(-high / pitch - 0.5)))
            i1 = int(math.ceil(-low / pitch - 0.5))
        else:
            i0 = max(0, int(math.floor(low / pitch - 0.5)))
            i1 = int(math.ceil(high / pitch - 0.5))
        return np.arange(i0, i1 + 1)

    x1 = (axis_indices(lo[0], hi[0]) + 0.5) * pitch
    x2 = (axis_indices(lo[1], hi[1]) + 0.5) * pitch
    x3 = -(axis_indices(lo[2], hi[2], negative=True) + 0.5) * pitch
    g1, g2, g3 = np.meshgrid(x1, x2, x3, indexing="ij")
    pts = np.column_stack([g1.ravel(), g2.ravel(), g3.ravel()])

    epsilon = np.zeros(pts.shape[0], dtype=np.complex128)
    taken = np.zeros(pts.shape[0], dtype=bool)
    for shape in shapes:
        m = shape.contains(pts) & ~taken
        epsilon[m] = shape.epsilon
        taken |= m
    pts = pts[taken]
    epsilon = epsilon[taken]
    vol = np.full(pts.shape[0], pitch**3)
    return Scene(pts, vol, epsilon)


# ---------------------------------------------------------------------------
# RunConfig
# ---------------------------------------------------------------------------


@dataclass
class RunConfig:
    spec: WaveguideSpec
    k: float
    grid: MeasurementGrid
    pitch: float
    shapes: list
    scene: Scene
    model: ForwardModel
    noise_level: float
    noise_seed: int
    lattice: ImageLattice
    evanescent: EvanescentPolicy
    output_dir: str
    threads: int = 1

    def basis(self, policy: EvanescentPolicy | None = None) -> ModeBasis:
        return enumerate_modes(self.spec, self.k, policy or self.evanescent)


def _get(cfg: dict, path: str, typ, default=None, required=True):
    node = cfg
    for part in path.split("."):
        if not isinstance(node, dict) or part not in node:
            if required and default is None:
                raise ValidationError(path, "missing required field")
            return default
        node = node[part]
    if typ is float and isinstance(node, (int, float)) and not isinstance(node, bool):
        return float(node)
    if typ is int and isinstance(node, int) and not isinstance(node, bool):
        return node
    if not isinstance(node, typ):
        raise ValidationError(path, f"expected {typ.__name__}, got {type(node).__name__}")
    return node


def _complex_from(value, path: str) -> complex:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return complex(value)
    if isinstance(value, list) and len(value) == 2:
        try:
            return complex(float(value[0]), float(value[1]))
        except (TypeError, ValueError):
            pass
    raise ValidationError(path, "expected a number or [re, im] pair")


def _positive(value, path: str):
    if not value > 0:
        raise ValidationError(path, f"must be positive, got {value}")
    return value


def _parse_shape(entry: dict, path: str):
    kind = _get(entry, "type", str)
    eps = _complex_from(entry.get("epsilon"), f"{path}.epsilon")
    if eps.real <= 0:
        raise ValidationError(f"{path}.epsilon", "real part must be positive")

    def triple(key):
        v = entry.get(key)
        if not (isinstance(v, list) and len(v) == 3):
            raise ValidationError(f"{path}.{key}", "expected [x1, x2, x3]")
        return tuple(float(c) for c in v)

    if kind == "ball":
        return Ball(triple("center"), _positive(float(entry.get("radius", 0)), f"{path}.radius"), eps)
    if kind == "box":
        hw = triple("half_widths")
        if min(hw) <= 0:
            raise ValidationError(f"{path}.half_widths", "must be positive")
        return Box(triple("center"), hw, eps)
    if kind == "cylinder":
        return Cylinder(
            triple("center"),
            _positive(float(entry.get("radius", 0)), f"{path}.radius"),
            _positive(float(entry.get("half_height", 0)), f"{path}.half_height"),
            eps,
        )
    if kind == "l_shape":
        return LShape(
            triple("center"),
            _positive(float(entry.get("half_width", 0)), f"{path}.half_width"),
            _positive(float(entry.get("half_thickness", 0)), f"{path}.half_thickness"),
            eps,
        )
    raise ValidationError(f"{path}.type", f"unknown shape type {kind!r}")


def _axis_range(cfg: dict, path: str):
    node = _get(cfg, path, dict)
    start = _get(node, "start", float)
    stop = _get(node, "stop", float)
    step = _get(node, "step", float, default=0.25, required=False)
    if stop < start:
        raise ValidationError(path, f"empty range [{start}, {stop}]")
    _positive(step, f"{path}.step")
    return (start, stop, step)


def parse_config(cfg: dict) -> RunConfig:
    """Validate a parsed JSON document into a RunConfig."""
    a = _positive(_get(cfg, "waveguide.a", float), "waveguide.a")
    b = _positive(_get(cfg, "waveguide.b", float), "waveguide.b")
    spec = WaveguideSpec(a, b)
    k = _positive(_get(cfg, "wavenumber", float), "wavenumber")
    try:
        enumerate_modes(spec, k)
    except CutoffResonance as exc:
        raise ValidationError("wavenumber", f"CutoffResonance: {exc}") from exc

    r = _get(cfg, "measurement.plane", float)
    if r >= 0:
        raise ValidationError("measurement.plane", f"must be negative, got {r}")
    n1 = _get(cfg, "measurement.n1", int)
    n2 = _get(cfg, "measurement.n2", int)
    if n1 < 1 or n2 < 1:
        raise ValidationError("measurement.n1", "grid must have at least one node per dimension")
    grid = MeasurementGrid(spec, r, n1, n2)

    pitch = _positive(_get(cfg, "scene.pitch", float, default=0.25, required=False), "scene.pitch")
    raw_shapes = _get(cfg, "scene.shapes", list, default=[], required=False)
    shapes = [_parse_shape(s, f"scene.shapes[{i}]") for i, s in enumerate(raw_shapes)]
    scene = voxelize(shapes, pitch, spec)

    wavelength = 2 * math.pi / k
    if scene.n_voxels:
        c = scene.centers
        if (
            c[:, 0].min() <= 0
            or c[:, 0].max() >= a
            or c[:, 1].min() <= 0
            or c[:, 1].max() >= b
        ):
            raise ValidationError("scene.shapes", "voxel centers fall outside the cross-section")
        if c[:, 2].max() + pitch / 2 >= 0:
            raise ValidationError("scene.shapes", "scatterer touches the terminating plate")
        if c[:, 2].min() - pitch / 2 - r < wavelength:
            raise ValidationError(
                "scene.shapes",
                f"scatterer must stay one wavelength ({wavelength:.3f}) above the "
                f"measurement plane at {r}",
            )

    kind = _get(cfg, "model.kind", str, default="born", required=False)
    if kind not in ("born", "ls"):
        raise ValidationError("model.kind", f"expected 'born' or 'ls', got {kind!r}")
    model = ForwardModel(
        kind,
        _positive(_get(cfg, "model.tol", float, default=1e-10, required=False), "model.tol"),
        _get(cfg, "model.max_iter", int, default=200, required=False),
    )

    level = _get(cfg, "noise.level", float, default=0.0, required=False)
    if level < 0:
        raise ValidationError("noise.level", "must be nonnegative")
    seed = _get(cfg, "noise.seed", int, default=0, required=False)

    lattice = ImageLattice.from_ranges(
        _axis_range(cfg, "imaging.x1"), _axis_range(cfg, "imaging.x2"), _axis_range(cfg, "imaging.x3")
    )
    if lattice.x3.max() >= 0:
        raise ValidationError("imaging.x3", "sampling points must lie inside the guide (x3 < 0)")
    if lattice.x3.min() <= r:
        raise ValidationError("imaging.x3", "sampling points must stay above the measurement plane")
    if lattice.x1.min() < 0 or lattice.x1.max() > a or lattice.x2.min() < 0 or lattice.x2.max() > b:
        raise ValidationError("imaging.x1", "sampling points must lie inside the cross-section")

    floors = _get(cfg, "evanescent.decay_floor", float, default=1e-12, required=False)
    cap = _get(cfg, "evanescent.max_per_family", int, default=5000, required=False)
    if scene.n_voxels:
        gap = float(np.min(np.abs(scene.centers[:, 2] - r)))
        policy = EvanescentPolicy(min_axial_gap=gap, decay_floor=floors, max_per_family=cap)
    else:
        policy = EvanescentPolicy.propagating_only()

    try:
        basis = enumerate_modes(spec, k, policy)
    except CutoffResonance as exc:
        raise ValidationError("wavenumber", f"CutoffResonance: {exc}") from exc
    grid.check_nyquist(basis)

    threads = _get(cfg, "threads", int, default=1, required=False)
    if threads < 1:
        raise ValidationError("threads", "must be at least 1")
    out_dir = _get(cfg, "output.dir", str, default="out", required=False)

    return RunConfig(
        spec=spec,
        k=k,
        grid=grid,
        pitch=pitch,
        shapes=shapes,
        scene=scene,
        model=model,
        noise_level=level,
        noise_seed=seed,
        lattice=lattice,
        evanescent=policy,
        output_dir=out_dir,
        threads=threads,
    )


def load_config(path) -> RunConfig:
    """Read, parse, and validate a JSON config file."""
    try:
        with open(path) as f:
            cfg = json.load(f)
    except FileNotFoundError as exc:
        raise ParseError(f"{path}: no such file") from exc
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ParseError(f"{path}: top-level JSON value must be an object")
    return parse_config(cfg)
