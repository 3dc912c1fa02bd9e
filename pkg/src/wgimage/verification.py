"""Built-in numerical cross-checks, reported by the ``verify`` subcommand.

Each check pits two independently implemented routes against each other
and returns the worst relative residual:

* mode orthogonality: quadrature Gram matrices on the measurement plane
  against the closed-form constants,
* operator adjointness: plane and volume inner products of the two
  operator halves,
* point-spread identity: closed-form point-spread field against the
  propagating projection of the real axial Green derivative,
* data-operator factorization: synthesized data against the composed
  operator chain, with the same forward model on both sides.
"""

from __future__ import annotations

import numpy as np

from . import imaging, modes, operators
from .green import GreenEvaluator
from .modes import ModeBasis
from .operators import ForwardModel, MeasurementGrid, Scene


def orthogonality_residuals(basis: ModeBasis, grid: MeasurementGrid) -> dict:
    """Worst relative deviation of the plane Gram matrices from closed form.

    TE family: inner products of the mirrored fields equal ``lam^2`` on the
    diagonal; TM family: (transverse minus axial) against transverse
    equals ``mu^2 g^2 / k^2``.  Off-diagonal entries must vanish.
    """
    prop = basis.propagating()
    nodes = grid.nodes
    w = grid.weight

    te = modes.te_fields(prop, nodes, mirrored=True)
    gram = w * np.einsum("nmi,nli->ml", te, np.conj(te), optimize=True)
    target = np.diag(prop.te_cut2)
    te_res = np.abs(gram - target).max() / prop.te_cut2.max() if prop.M else 0.0

    tmt = modes.tm_transverse_fields(prop, nodes, mirrored=True)
    tma = modes.tm_axial_fields(prop, nodes, mirrored=True)
    gram = w * np.einsum("nmi,nli->ml", tmt - tma, np.conj(tmt), optimize=True)
    consts = prop.tm_cut2 * (prop.tm_axial.real ** 2) / prop.k**2
    tm_res = np.abs(gram - np.diag(consts)).max() / consts.max() if prop.N else 0.0
    return {"te": float(te_res), "tm": float(tm_res)}


def adjointness_residual(
    evaluator: GreenEvaluator,
    grid: MeasurementGrid,
    scene: Scene,
    trials: int = 50,
    seed: int = 0,
) -> float:
    """Worst relative mismatch of ``<v, H g>_D`` against ``<H* v, g>_plane``."""
    rng = np.random.default_rng(seed)
    nn, nv = grid.n_nodes, scene.n_voxels
    worst = 0.0
    for _ in range(trials):
        g = rng.standard_normal((nn, 3)) + 1j * rng.standard_normal((nn, 3))
        g[:, 2] = 0.0
        v = rng.standard_normal((nv, 3)) + 1j * rng.standard_normal((nv, 3))
        hg = operators.herglotz_field(evaluator, grid, g, scene.centers)
        hsv = operators.adjoint_field(evaluator, grid, scene, v)
        lhs = np.sum(scene.volumes[:, None] * v * np.conj(hg))
        rhs = grid.weight * np.sum(hsv * np.conj(g))
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), 1e-300))
    return float(worst)


def psf_derivative_residuals(
    evaluator: GreenEvaluator, trials: int = 100, seed: int = 0, gap: float = 0.5
) -> dict:
    """Closed-form point-spread field against the Green-derivative route.

    Draws random (anchor, sampling point) pairs with axial separation at
    least ``gap`` and returns the worst relative disagreement plus the
    worst relative imaginary residue of the closed form.
    """
    basis = evaluator.basis
    spec = basis.spec
    rng = np.random.default_rng(seed)
    worst = 0.0
    worst_imag = 0.0
    for _ in range(trials):
        x = np.array(
            [
                rng.uniform(0.1 * spec.a, 0.9 * spec.a),
                rng.uniform(0.1 * spec.b, 0.9 * spec.b),
                rng.uniform(-9.0, -5.0),
            ]
        )
        z = np.array(
            [
                rng.uniform(0.1 * spec.a, 0.9 * spec.a),
                rng.uniform(0.1 * spec.b, 0.9 * spec.b),
                rng.uniform(-4.5, -1.0),
            ]
        )
        if abs(x[2] - z[2]) < gap:
            continue
        fld = imaging.psf_field(basis, x, z)
        scale = max(np.abs(fld.real).max(), 1e-300)
        worst_imag = max(worst_imag, np.abs(fld.imag).max() / scale)
        for axis in range(3):
            ref = evaluator.re_dx3_propagating(x, z, axis)
            num = np.linalg.norm(fld[:, axis].real - ref)
            worst = max(worst, num / max(np.linalg.norm(ref), 1e-300))
    return {"match": float(worst), "imag": float(worst_imag)}


def factorization_residuals(
    evaluator: GreenEvaluator,
    scene: Scene,
    grid: MeasurementGrid,
    model: ForwardModel,
    trials: int = 10,
    seed: int = 0,
) -> float:
    """Worst factorization residual over random tangential densities."""
    rng = np.random.default_rng(seed)
    data = operators.synthesize_data(evaluator, scene, grid, model)
    worst = 0.0
    for _ in range(trials):
        g = rng.standard_normal((grid.n_nodes, 3)) + 1j * rng.standard_normal((grid.n_nodes, 3))
        g[:, 2] = 0.0
        worst = max(
            worst, operators.factorization_residual(evaluator, scene, grid, model, g, data=data)
        )
    return float(worst)


def run_checks(
    evaluator: GreenEvaluator,
    scene: Scene,
    grid: MeasurementGrid,
    model: ForwardModel,
    seed: int = 0,
) -> dict:
    """Run all four check groups and report residuals with pass verdicts."""
    ortho = orthogonality_residuals(evaluator.basis, grid)
    adj = adjointness_residual(evaluator, grid, scene, trials=20, seed=seed)
    psf = psf_derivative_residuals(evaluator, trials=40, seed=seed)
    fac_tol = 1e-8 if model.kind == "born" else 10 * model.tol
    fac = factorization_residuals(evaluator, scene, grid, model, trials=5, seed=seed)
    checks = {
        "orthogonality_te": {"residual": ortho["te"], "tolerance": 1e-10},
        "orthogonality_tm": {"residual": ortho["tm"], "tolerance": 1e-10},
        "adjointness": {"residual": adj, "tolerance": 1e-8},
        "psf_green_identity": {"residual": psf["match"], "tolerance": 1e-10},
        "psf_imaginary_part": {"residual": psf["imag"], "tolerance": 1e-12},
        "factorization": {"residual": fac, "tolerance": fac_tol},
    }
    for entry in checks.values():
        entry["pass"] = bool(entry["residual"] < entry["tolerance"])
    return {"checks": checks, "all_pass": all(c["pass"] for c in checks.values())}
