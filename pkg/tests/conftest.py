"""Shared fixtures and independent numerical oracles for the test suite."""

import numpy as np
import pytest

import wgimage as wg
from wgimage.green import GreenEvaluator


@pytest.fixture(scope="session")
def spec10():
    return wg.WaveguideSpec(10.0, 10.0)


@pytest.fixture(scope="session")
def basis_k3(spec10):
    """Propagating-only basis of the reference geometry (M=82, N=64)."""
    return wg.enumerate_modes(spec10, 3.0)


@pytest.fixture(scope="session")
def basis_k3_evanescent(spec10):
    """Basis with evanescent modes retained for gaps >= 1."""
    return wg.enumerate_modes(spec10, 3.0, wg.EvanescentPolicy.for_gap(1.0))


@pytest.fixture(scope="session")
def evaluator_k3(basis_k3_evanescent):
    return GreenEvaluator(basis_k3_evanescent)


@pytest.fixture(scope="session")
def grid20(spec10):
    return wg.MeasurementGrid(spec10, -10.0, 20, 20)


def random_interior_points(rng, n, spec, x3_range, margin=0.5):
    pts = np.empty((n, 3))
    pts[:, 0] = rng.uniform(margin, spec.a - margin, n)
    pts[:, 1] = rng.uniform(margin, spec.b - margin, n)
    pts[:, 2] = rng.uniform(x3_range[0], x3_range[1], n)
    return pts


# ---------------------------------------------------------------------------
# Finite-difference oracles (kept independent of the package internals)
# ---------------------------------------------------------------------------


def fd_curl(field, pts, h):
    """Central-difference curl of a batched vector field at given points."""
    pts = np.asarray(pts, dtype=float)
    n = pts.shape[0]
    stencil = []
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        stencil.append(pts + e)
        stencil.append(pts - e)
    vals = field(np.vstack(stencil))
    d = [
        (vals[2 * i * n : (2 * i + 1) * n] - vals[(2 * i + 1) * n : (2 * i + 2) * n]) / (2 * h)
        for i in range(3)
    ]
    return np.stack(
        [
            d[1][:, 2] - d[2][:, 1],
            d[2][:, 0] - d[0][:, 2],
            d[0][:, 1] - d[1][:, 0],
        ],
        axis=1,
    )


def fd_curl_curl(field, pts, h):
    """Nested central-difference curl-curl (the Maxwell double curl)."""
    return fd_curl(lambda q: fd_curl(field, q, h), pts, h)


def pde_residual(field, pts, k, h):
    """Relative residual of ``curl curl F - k^2 F = 0`` at the points."""
    lhs = fd_curl_curl(field, pts, h)
    ref = field(pts)
    num = np.linalg.norm(lhs - k**2 * ref, axis=1)
    den = (k**2) * np.linalg.norm(ref, axis=1)
    return num / np.maximum(den, 1e-300)


def brute_force_mode_counts(a, b, k):
    """Independent lattice count of propagating modes per family."""
    import math

    te = 0
    tm = 0
    p1 = 0
    while (p1 * math.pi / a) < k:
        p2 = 0
        while math.hypot(p1 * math.pi / a, p2 * math.pi / b) < k:
            if (p1, p2) != (0, 0):
                te += 1
            if p1 >= 1 and p2 >= 1:
                tm += 1
            p2 += 1
        p1 += 1
    return te, tm
