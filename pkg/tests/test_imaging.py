"""Probe function, point-spread field, data matrix, imaging, noise, exports."""

import math

import numpy as np
import pytest

import wgimage as wg
from wgimage import imaging, modes as md, operators as ops
from wgimage.errors import DimensionMismatch, EmptyLattice
from wgimage.green import GreenEvaluator


@pytest.fixture(scope="module")
def born_setup(spec10):
    """Two weak voxels on distinct planes, 20x20 grid, Born data."""
    basis = wg.enumerate_modes(spec10, 3.0, wg.EvanescentPolicy.for_gap(3.5))
    ev = GreenEvaluator(basis)
    grid = wg.MeasurementGrid(spec10, -10.0, 20, 20)
    scene = wg.Scene(
        np.array([[4.0, 4.5, -4.5], [6.0, 5.5, -5.5]]),
        np.full(2, 0.015625),
        np.full(2, 2 + 2j),
        label="two-voxel",
    )
    data = ops.synthesize_data(ev, scene, grid, wg.ForwardModel.born())
    dm = imaging.assemble_data_matrix(data, basis)
    return ev, grid, scene, data, dm


@pytest.fixture(scope="module")
def tiny_basis(spec10):
    """k=0.35: only the two lowest TE modes propagate, no TM modes."""
    return wg.enumerate_modes(spec10, 0.35)


class TestProbeMatrix:
    def test_uses_only_propagating_modes(self, spec10, basis_k3, basis_k3_evanescent):
        y = np.array([3.0, 4.0, -10.0])
        z = np.array([6.0, 5.0, -5.0])
        p1 = imaging.probe_matrix(basis_k3, y, z)
        p2 = imaging.probe_matrix(basis_k3_evanescent, y, z)
        np.testing.assert_array_equal(p1, p2)

    def test_two_mode_regime_hand_formula(self, spec10, tiny_basis):
        assert tiny_basis.M == 2 and tiny_basis.N == 0
        k = 0.35
        r, z3 = -10.0, -5.0
        y = np.array([3.0, 4.0, r])
        z = np.array([6.0, 5.0, z3])
        lam = math.pi / 10
        h = math.sqrt(k**2 - lam**2)
        rn = 1 / math.sqrt(50.0)
        expected = np.zeros((3, 3), dtype=complex)
        # pair (0,1): profile (-lam sin(lam x2), 0, 0);  pair (1,0): (0, lam sin(lam x1), 0)
        prof_y = {
            (0, 1): np.array([-lam * math.sin(lam * y[1]), 0.0, 0.0]) * rn,
            (1, 0): np.array([0.0, lam * math.sin(lam * y[0]), 0.0]) * rn,
        }
        prof_z = {
            (0, 1): np.array([-lam * math.sin(lam * z[1]), 0.0, 0.0]) * rn,
            (1, 0): np.array([0.0, lam * math.sin(lam * z[0]), 0.0]) * rn,
        }
        for pair in ((0, 1), (1, 0)):
            coef = -(h / lam**2) * math.sin(h * z3) * np.exp(1j * h * r)
            expected += coef * np.outer(prof_y[pair], prof_z[pair])
        got = imaging.probe_matrix(tiny_basis, y, z)
        np.testing.assert_allclose(got, expected, rtol=1e-13, atol=1e-18)

    def test_matches_independent_mode_sum(self, spec10, basis_k3):
        # scalar route: conjugated single-mode evaluations, looped
        basis = basis_k3
        y = np.array([3.3, 4.1, -10.0])
        z = np.array([6.2, 5.7, -4.5])
        zm = wg.mirror_point(z)
        ym = wg.mirror_point(y)
        ref = np.zeros((3, 3), dtype=complex)
        for m in basis.te_modes:
            coef = -1j * m.axial / (2 * m.cutoff**2)
            fy = np.conj(wg.eval_mode_field(m, spec10, ym, "te"))
            fz = np.conj(wg.eval_mode_field(m, spec10, z, "te")) - np.conj(
                wg.eval_mode_field(m, spec10, zm, "te")
            )
            ref += coef * np.outer(fy, fz)
        for n in basis.tm_modes:
            coef = 1j * basis.k**2 / (2 * n.cutoff**2 * n.axial)
            fy = np.conj(wg.eval_mode_field(n, spec10, ym, "tm_transverse"))
            fz = (
                np.conj(wg.eval_mode_field(n, spec10, z, "tm_transverse"))
                - np.conj(wg.eval_mode_field(n, spec10, zm, "tm_transverse"))
                + np.conj(wg.eval_mode_field(n, spec10, z, "tm_axial"))
                + np.conj(wg.eval_mode_field(n, spec10, zm, "tm_axial"))
            )
            ref += coef * np.outer(fy, fz)
        got = imaging.probe_matrix(basis, y, z)
        np.testing.assert_allclose(got, ref, rtol=1e-12, atol=1e-16)


class TestPointSpreadField:
    def test_real_valued(self, spec10, basis_k3):
        rng = np.random.default_rng(50)
        for _ in range(100):
            x = np.array([rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(-8, -5.2)])
            z = np.array([rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(-4.8, -2)])
            fld = imaging.psf_field(basis_k3, x, z)
            assert np.abs(fld.imag).max() <= 1e-12 * np.abs(fld.real).max()

    def test_equals_green_derivative_projection(self, spec10, evaluator_k3):
        rng = np.random.default_rng(51)
        for _ in range(100):
            x = np.array([rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(-8, -5.2)])
            z = np.array([rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(-4.8, -2)])
            if rng.uniform() < 0.5:
                x, z = z, x  # exercise both derivative branches
            fld = imaging.psf_field(evaluator_k3.basis, x, z)
            for j in range(3):
                ref = evaluator_k3.re_dx3_propagating(x, z, j)
                err = np.linalg.norm(fld[:, j].real - ref)
                assert err <= 1e-10 * max(np.linalg.norm(ref), 1e-300)

    def test_matches_plane_quadrature(self, spec10):
        # independent quadrature of the defining plane integral
        basis = wg.enumerate_modes(spec10, 3.0, wg.EvanescentPolicy.for_gap(4.0))
        ev = GreenEvaluator(basis, 4.0)
        grid = wg.MeasurementGrid(spec10, -10.0, 24, 24)
        x_star = np.array([4.2, 5.1, -5.5])
        z = np.array([6.0, 4.0, -4.6])
        table = ev.half_table(x_star[None, :], grid.nodes)[0]
        fld = imaging.psf_field(basis, x_star, z)
        for j in range(3):
            dens = imaging.probe_density(basis, grid, z, j)
            quad = grid.weight * np.einsum("nij,nj->i", table, dens)
            assert np.linalg.norm(quad - fld[:, j]) <= 1e-6 * np.linalg.norm(fld[:, j])

    def test_psf_vector_is_real_array(self, basis_k3):
        v = imaging.psf_vector(basis_k3, [5.0, 5.0, -5.0], [4.0, 4.0, -3.0], 1)
        assert v.dtype.kind == "f" and v.shape == (3,)


class TestProbeModeVector:
    def test_analytic_matches_quadrature(self, spec10, basis_k3, grid20):
        rng = np.random.default_rng(60)
        for _ in range(20):
            z = np.array([rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(-8, -2)])
            axis = rng.integers(0, 3)
            ga = wg.probe_mode_vector(basis_k3, z, axis)
            gq = wg.probe_mode_vector(basis_k3, z, axis, method="quadrature", grid=grid20)
            assert np.linalg.norm(ga - gq) <= 1e-8 * np.linalg.norm(ga)

    def test_tiny_wavenumber_has_no_tm_block(self, tiny_basis):
        g = wg.probe_mode_vector(tiny_basis, [5.0, 4.0, -5.0], 0)
        assert g.shape == (2,)

    def test_transverse_mirror_parity(self, spec10, basis_k3):
        # first-axis entries pick up (-1)**p1 under z1 -> a - z1
        z = np.array([3.7, 4.9, -5.3])
        zm = np.array([spec10.a - z[0], z[1], z[2]])
        g = wg.probe_mode_vector(basis_k3, z, 0)
        gm = wg.probe_mode_vector(basis_k3, zm, 0)
        signs = np.array([(-1) ** m.pair[0] for m in basis_k3.te_modes])
        np.testing.assert_allclose(gm[: basis_k3.M], signs * g[: basis_k3.M], atol=1e-14)


class TestAssembly:
    def test_empty_scene_gives_zero_matrix(self, spec10, basis_k3, grid20):
        data = ops.synthesize_data(
            GreenEvaluator(basis_k3, 4.0), wg.Scene.empty(), grid20, wg.ForwardModel.born()
        )
        dm = imaging.assemble_data_matrix(data, basis_k3)
        assert np.all(dm.values == 0)

    def test_single_weak_voxel_closed_form(self, spec10):
        basis = wg.enumerate_modes(spec10, 3.0, wg.EvanescentPolicy.for_gap(4.0))
        ev = GreenEvaluator(basis)
        grid = wg.MeasurementGrid(spec10, -10.0, 24, 24)
        scene = wg.Scene(np.array([[5.3, 4.6, -5.0]]), np.array([1e-3]), np.array([2 + 2j]))
        data = ops.synthesize_data(ev, scene, grid, wg.ForwardModel.born())
        dm = imaging.assemble_data_matrix(data, basis)

        prop = basis.propagating()
        v = scene.centers
        a_te = (
            md.te_profiles(prop, v)[0]
            * md.axial_phase_diff(prop.te_axial, v[:, 2])[0][:, None]
        )
        a_tm = md.tm_vectors(
            prop,
            v,
            md.axial_phase_diff(prop.tm_axial, v[:, 2]),
            md.axial_phase_sum(prop.tm_axial, v[:, 2]),
        )[0]
        amps = np.vstack([a_te, a_tm])
        coef = np.concatenate(
            [1j / (2 * prop.te_axial * prop.te_cut2), -1j / (2 * prop.tm_axial * prop.tm_cut2)]
        )
        pred = 9.0 * 1e-3 * (1 + 2j) * np.einsum("j,p,ji,pi->jp", coef, coef, amps, amps)
        assert np.abs(dm.values - pred).max() <= 1e-8 * np.abs(pred).max()

    def test_born_linearity_in_contrast(self, born_setup, spec10):
        ev, grid, scene, data, dm = born_setup
        doubled = wg.Scene(scene.centers, scene.volumes, 1 + 2 * scene.contrast)
        data2 = ops.synthesize_data(ev, doubled, grid, wg.ForwardModel.born())
        dm2 = imaging.assemble_data_matrix(data2, dm.basis)
        np.testing.assert_allclose(dm2.values, 2 * dm.values, rtol=1e-13)

    def test_grid_resolution_guard(self, spec10, basis_k3):
        grid = wg.MeasurementGrid(spec10, -10.0, 16, 16)
        nn = grid.n_nodes
        data = ops.PointSourceData(grid, 3.0, np.zeros((nn, nn, 3, 3), dtype=complex))
        with pytest.raises(DimensionMismatch):
            imaging.assemble_data_matrix(data, basis_k3)


class TestImagingFunction:
    def test_zero_matrix(self, born_setup):
        *_, dm = born_setup
        zero = imaging.DataMatrix(np.zeros_like(dm.values), dm.basis, dm.grid)
        assert imaging.imaging_value(zero, [5.0, 5.0, -5.0]) == 0.0

    def test_phase_invariance(self, born_setup):
        *_, dm = born_setup
        rotated = imaging.DataMatrix(np.exp(0.7j) * dm.values, dm.basis, dm.grid)
        for z in ([4.0, 4.5, -4.5], [2.0, 7.0, -6.0]):
            assert imaging.imaging_value(rotated, z) == pytest.approx(
                imaging.imaging_value(dm, z), rel=1e-12
            )

    def test_homogeneity(self, born_setup):
        *_, dm = born_setup
        scaled = imaging.DataMatrix(3.7 * dm.values, dm.basis, dm.grid)
        z = [4.0, 4.5, -4.5]
        assert imaging.imaging_value(scaled, z) == pytest.approx(
            3.7 * imaging.imaging_value(dm, z), rel=1e-12
        )

    def test_peak_near_voxels(self, born_setup):
        ev, grid, scene, data, dm = born_setup
        lattice = imaging.ImageLattice.from_ranges((2.0, 8.0, 0.25), (2.0, 8.0, 0.25), (-5.0, -5.0, 0.25))
        vol = imaging.image_volume(dm, lattice)
        i, j = np.unravel_index(vol.values[:, :, 0].argmax(), vol.values.shape[:2])
        peak = np.array([lattice.x1[i], lattice.x2[j]])
        dists = np.linalg.norm(scene.centers[:, :2] - peak, axis=1)
        assert dists.min() <= 0.8

    def test_reformulated_inner_products_agree(self, born_setup):
        # plane pairing of the data against the probe equals the voxel
        # pairing of the induced current against the incident probe field
        ev, grid, scene, data, dm = born_setup
        basis = dm.basis
        for z in (np.array([4.0, 4.5, -4.5]), np.array([5.5, 5.0, -6.0])):
            for j in range(3):
                dens = imaging.probe_density(basis, grid, z, j)
                s = ops.apply_data_operator(data, dens)
                lhs = abs(grid.weight * np.sum(dens * s))
                hpsi = ops.herglotz_field(ev, grid, dens, scene.centers)
                current = ops.contrast_current(ev, scene, hpsi, wg.ForwardModel.born())
                rhs = abs(np.sum(scene.volumes[:, None] * current * np.conj(hpsi)))
                assert lhs == pytest.approx(rhs, rel=1e-6)

    def test_bounded_ratio_against_psf_energy(self, born_setup):
        # the imaging value tracks the voxel-quadrature energy of the
        # point-spread field within scene-independent constant factors
        ev, grid, scene, data, dm = born_setup
        rng = np.random.default_rng(70)
        ratios = []
        for _ in range(200):
            z = np.array([rng.uniform(1, 9), rng.uniform(1, 9), rng.uniform(-8, -2)])
            val = imaging.imaging_value(dm, z)
            energy = 0.0
            for v, vol in zip(scene.centers, scene.volumes):
                fld = imaging.psf_field(dm.basis, v, z)
                energy += vol * (fld.real**2).sum()
            ratios.append(val / energy)
        ratios = np.array(ratios)
        assert ratios.max() / ratios.min() < 20.0


class TestVolumes:
    def test_normalization_and_rescale_invariance(self, born_setup):
        *_, dm = born_setup
        lattice = imaging.ImageLattice.from_ranges((3.0, 7.0, 0.5), (3.0, 7.0, 0.5), (-6.0, -4.0, 0.5))
        vol = imaging.image_volume(dm, lattice)
        assert vol.values.max() == 1.0
        assert vol.values.min() >= 0.0
        scaled = imaging.DataMatrix(2.5 * dm.values, dm.basis, dm.grid)
        vol2 = imaging.image_volume(scaled, lattice)
        np.testing.assert_allclose(vol2.values, vol.values, rtol=1e-12)
        np.testing.assert_allclose(vol2.raw, 2.5 * vol.raw, rtol=1e-12)

    def test_threaded_evaluation_matches(self, born_setup):
        *_, dm = born_setup
        lattice = imaging.ImageLattice.from_ranges((3.0, 7.0, 0.5), (3.0, 7.0, 0.5), (-6.0, -4.0, 0.5))
        v1 = imaging.image_volume(dm, lattice, threads=1)
        v2 = imaging.image_volume(dm, lattice, threads=4)
        np.testing.assert_array_equal(v1.values, v2.values)

    def test_empty_lattice_rejected(self):
        with pytest.raises(EmptyLattice):
            imaging.ImageLattice([], [1.0], [2.0])
        with pytest.raises(EmptyLattice):
            imaging.ImageLattice.from_ranges((1.0, 0.0, 0.5), (0, 1, 1), (0, 1, 1))

    def test_local_maxima_detector(self):
        v = np.zeros((5, 5))
        v[1, 1] = 1.0
        v[3, 3] = 0.5
        v[0, 4] = 0.3
        peaks = imaging.local_maxima_2d(v, 0.2)
        assert set(peaks) == {(1, 1), (3, 3), (0, 4)}
        assert imaging.local_maxima_2d(v, 0.6) == [(1, 1)]


class TestNoise:
    def test_zero_level_is_exact_copy(self, born_setup):
        *_, dm = born_setup
        noisy = imaging.add_noise(dm, 0.0, 7)
        np.testing.assert_array_equal(noisy.values, dm.values)

    def test_seed_determinism(self, born_setup):
        *_, dm = born_setup
        n1 = imaging.add_noise(dm, 0.05, 123)
        n2 = imaging.add_noise(dm, 0.05, 123)
        np.testing.assert_array_equal(n1.values, n2.values)
        n3 = imaging.add_noise(dm, 0.05, 124)
        assert not np.array_equal(n3.values, n1.values)

    def test_relative_frobenius_concentration(self, born_setup):
        *_, dm = born_setup
        assert dm.values.shape[0] >= 50
        level = 0.05
        rels = []
        for seed in range(20):
            noisy = imaging.add_noise(dm, level, seed)
            rels.append(np.linalg.norm(noisy.values - dm.values) / np.linalg.norm(dm.values))
        mean = np.mean(rels)
        assert 0.9 * level <= mean <= 1.1 * level

    def test_provenance_recorded(self, born_setup):
        *_, dm = born_setup
        noisy = imaging.add_noise(dm, 0.3, 42)
        assert noisy.provenance["noise_level"] == 0.3
        assert noisy.provenance["seed"] == 42


class TestExports:
    def test_data_matrix_round_trip_bit_exact(self, born_setup, tmp_path):
        *_, dm = born_setup
        path = tmp_path / "dm.wgus"
        imaging.write_data_matrix(path, dm)
        back = imaging.read_data_matrix(path)
        assert back.values.tobytes() == dm.values.tobytes()
        assert back.grid == dm.grid
        assert back.basis.M == dm.basis.M and back.basis.N == dm.basis.N
        assert back.provenance == dm.provenance

    def test_csv_round_trip(self, tmp_path):
        lattice = imaging.ImageLattice.from_ranges((0.5, 2.0, 0.5), (1.0, 2.0, 0.5), (-5.0, -4.0, 0.5))
        rng = np.random.default_rng(4)
        values = rng.uniform(size=lattice.shape)
        vol = imaging.ImageVolume(lattice, values)
        path = tmp_path / "vol.csv"
        imaging.write_volume_csv(path, vol)
        head = path.read_text().splitlines()[0]
        assert head == "x1,x2,x3,value"
        back = imaging.read_volume_csv(path)
        np.testing.assert_allclose(back.values, values, rtol=1e-15)
        np.testing.assert_allclose(back.lattice.x1, lattice.x1)

    def test_vtk_round_trip_and_header(self, tmp_path):
        lattice = imaging.ImageLattice.from_ranges((0.5, 2.0, 0.5), (1.0, 2.0, 0.5), (-5.0, -4.0, 0.5))
        rng = np.random.default_rng(5)
        values = rng.uniform(size=lattice.shape)
        vol = imaging.ImageVolume(lattice, values)
        path = tmp_path / "vol.vtk"
        imaging.write_volume_vtk(path, vol)
        text = path.read_text()
        assert "DATASET STRUCTURED_POINTS" in text
        assert "SCALARS I2 double 1" in text
        back = imaging.read_volume_vtk(path)
        np.testing.assert_allclose(back.values, values, rtol=1e-15)
        np.testing.assert_allclose(back.lattice.x3, lattice.x3)
