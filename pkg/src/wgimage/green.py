"""Dyadic Green functions of the full and terminating waveguide.

Both Green functions are truncated modal series.  With the per-mode
coefficients

    c = i / (2 * h * lam^2)        (TE family)
    d = -i / (2 * g * mu^2)        (TM family)

the full-guide kernel for an observer ``x`` above the source ``y``
(``x3 > y3``) reads

    sum_m c_m TE_m(x) TE_m(y-)^T
    + sum_n d_n [TMt_n(x) + TMa_n(x)] [TMt_n(y-) - TMa_n(y-)]^T

and symmetrically with mirrored first arguments for ``x3 < y3``; ``p-``
denotes the reflection of ``p`` through the terminating plate.  The
terminating-guide kernel augments every factor with its image so that the
tangential trace cancels on the plate, e.g. the TE factor becomes
``TE_m(x) - TE_m(x-)`` above the source.

Series are truncated by the basis' evanescent policy, which is tied to the
smallest axial separation ``min_axial_gap`` the caller declares.  No
source-singularity handling is attempted: evaluations closer than the gap
raise :class:`CoincidentAxialPlanes`.

Everything here is read-only after construction; evaluation over batches
of point pairs is safe to run concurrently.
"""

from __future__ import annotations

from collections import OrderedDict

import numpy as np

from . import modes
from .errors import CoincidentAxialPlanes, PointOutsideHalfGuide

_FULL = "full"
_HALF = "half"

_WALL_SLACK = 1e-12
_TABLE_MEMO_SIZE = 8


class GreenEvaluator:
    """Evaluates the modal Green series for one basis.

    Parameters
    ----------
    basis : modes.ModeBasis
        Mode set; its evanescent policy fixes the series truncation.
    min_axial_gap : float, optional
        Smallest ``|x3 - y3|`` the caller will request.  Defaults to the
        basis policy's gap; must be given for propagating-only bases.
    """

    def __init__(self, basis: modes.ModeBasis, min_axial_gap: float | None = None):
        self.basis = basis
        if min_axial_gap is None:
            min_axial_gap = basis.policy.min_axial_gap
            if not np.isfinite(min_axial_gap):
                min_axial_gap = 0.0
        if min_axial_gap < 0:
            raise CoincidentAxialPlanes("min_axial_gap must be nonnegative")
        self.min_axial_gap = float(min_axial_gap)
        # guard: CutoffResonance at enumeration keeps both denominators away from 0
        self.c = 1j / (2.0 * basis.te_axial * basis.te_cut2)
        self.d = -1j / (2.0 * basis.tm_axial * basis.tm_cut2)
        self._prop = None
        self._table_memo: OrderedDict = OrderedDict()

    # -- validation ---------------------------------------------------------

    def _check_half_points(self, pts):
        a, b = self.basis.spec.a, self.basis.spec.b
        if (
            np.any(pts[:, 2] > _WALL_SLACK)
            or np.any(pts[:, 0] < -_WALL_SLACK)
            or np.any(pts[:, 0] > a + _WALL_SLACK)
            or np.any(pts[:, 1] < -_WALL_SLACK)
            or np.any(pts[:, 1] > b + _WALL_SLACK)
        ):
            raise PointOutsideHalfGuide("points must lie in the closure of the half guide")

    def _check_gap(self, x3, y3):
        gap = np.min(np.abs(np.asarray(x3) - np.asarray(y3)))
        if gap < max(self.min_axial_gap, np.finfo(float).tiny):
            raise CoincidentAxialPlanes(
                f"axial separation {gap:.3e} below declared minimum {self.min_axial_gap:.3e}"
            )

    # -- per-branch factors -------------------------------------------------
    #
    # Upper branch means x3 > y3.  ``deriv`` multiplies the factors by the
    # term-wise axial derivative: phases at the point itself pick up
    # +i*axial, mirrored phases -i*axial (which swaps diff and sum combos).

    def _te_x_factor(self, pts, guide, upper, deriv=False):
        h = self.basis.te_axial
        x3 = pts[:, 2]
        prof = modes.te_profiles(self.basis, pts)
        if guide == _HALF:
            ph = modes.axial_phase_diff(h, x3) if upper else modes.axial_phase(h, x3, mirrored=True)
            if deriv:
                ph = (
                    (1j * h) * modes.axial_phase_sum(h, x3)
                    if upper
                    else (-1j * h) * ph
                )
        else:
            ph = modes.axial_phase(h, x3, mirrored=not upper)
            if deriv:
                ph = ph * (1j * h if upper else -1j * h)
        return prof * ph[:, :, None]

    def _te_y_factor(self, pts, guide, upper, deriv=False):
        h = self.basis.te_axial
        y3 = pts[:, 2]
        prof = modes.te_profiles(self.basis, pts)
        if guide == _HALF:
            ph = modes.axial_phase(h, y3, mirrored=True) if upper else modes.axial_phase_diff(h, y3)
            if deriv:
                ph = (
                    (-1j * h) * ph
                    if upper
                    else (1j * h) * modes.axial_phase_sum(h, y3)
                )
        else:
            ph = modes.axial_phase(h, y3, mirrored=upper)
            if deriv:
                ph = ph * (-1j * h if upper else 1j * h)
        return prof * ph[:, :, None]

    def _tm_x_factor(self, pts, guide, upper, deriv=False):
        g = self.basis.tm_axial
        x3 = pts[:, 2]
        if guide == _HALF and upper:
            # [TMt(x) - TMt(x-)] + [TMa(x) + TMa(x-)]
            tp, ap = modes.axial_phase_diff(g, x3), modes.axial_phase_sum(g, x3)
            if deriv:
                tp, ap = (1j * g) * ap, (1j * g) * tp
        else:
            # lower half branch and lower full branch: [TMt - TMa](x-);
            # upper full branch: [TMt + TMa](x)
            if guide == _FULL and upper:
                ph = modes.axial_phase(g, x3)
                sgn = 1.0
                dfac = 1j * g
            else:
                ph = modes.axial_phase(g, x3, mirrored=True)
                sgn = -1.0
                dfac = -1j * g
            tp, ap = ph, sgn * ph
            if deriv:
                tp, ap = dfac * tp, dfac * ap
        return modes.tm_vectors(self.basis, pts, tp, ap)

    def _tm_y_factor(self, pts, guide, upper, deriv=False):
        g = self.basis.tm_axial
        y3 = pts[:, 2]
        if guide == _HALF and not upper:
            # [TMt(y) - TMt(y-)] + [TMa(y) + TMa(y-)]
            tp, ap = modes.axial_phase_diff(g, y3), modes.axial_phase_sum(g, y3)
            if deriv:
                tp, ap = (1j * g) * ap, (1j * g) * tp
        else:
            # upper branches: [TMt - TMa](y-); lower full branch: [TMt + TMa](y)
            if guide == _FULL and not upper:
                ph = modes.axial_phase(g, y3)
                sgn = 1.0
                dfac = 1j * g
            else:
                ph = modes.axial_phase(g, y3, mirrored=True)
                sgn = -1.0
                dfac = -1j * g
            tp, ap = ph, sgn * ph
            if deriv:
                tp, ap = dfac * tp, dfac * ap
        return modes.tm_vectors(self.basis, pts, tp, ap)

    # -- assembly -----------------------------------------------------------

    def _pairs(self, xs, ys, guide, deriv_wrt=None):
        xs = modes._as_points(xs)
        ys = modes._as_points(ys)
        if xs.shape != ys.shape:
            raise ValueError("point batches must have matching shapes")
        if guide == _HALF:
            self._check_half_points(xs)
            self._check_half_points(ys)
        self._check_gap(xs[:, 2], ys[:, 2])

        out = np.zeros((xs.shape[0], 3, 3), dtype=np.complex128)
        upper_mask = xs[:, 2] > ys[:, 2]
        for upper in (True, False):
            sel = np.nonzero(upper_mask == upper)[0]
            if sel.size == 0:
                continue
            dx = deriv_wrt == "x"
            dy = deriv_wrt == "y"
            xv = self._te_x_factor(xs[sel], guide, upper, deriv=dx)
            yv = self._te_y_factor(ys[sel], guide, upper, deriv=dy)
            out[sel] = np.einsum("m,pmi,pmj->pij", self.c, xv, yv, optimize=True)
            xv = self._tm_x_factor(xs[sel], guide, upper, deriv=dx)
            yv = self._tm_y_factor(ys[sel], guide, upper, deriv=dy)
            out[sel] += np.einsum("m,pmi,pmj->pij", self.d, xv, yv, optimize=True)
        return out

    def _table(self, xs, ys, guide, deriv_wrt=None):
        xs = modes._as_points(xs)
        ys = modes._as_points(ys)
        if guide == _HALF:
            self._check_half_points(xs)
            self._check_half_points(ys)
        diffs = xs[:, 2][:, None] - ys[:, 2][None, :]
        self._check_gap(xs[:, 2][:, None], ys[:, 2][None, :])
        all_upper = bool(np.all(diffs > 0))
        all_lower = bool(np.all(diffs < 0))
        if not (all_upper or all_lower):
            raise CoincidentAxialPlanes(
                "table evaluation requires all x3 on one side of all y3; "
                "use pairwise evaluation for mixed branches"
            )
        upper = all_upper
        dx = deriv_wrt == "x"
        dy = deriv_wrt == "y"

        def contract(coef, xv, yv):
            # (nx,3,ny,3) via one complex GEMM over the mode axis
            nx, nm = xv.shape[0], xv.shape[1]
            ny = yv.shape[0]
            left = (xv * coef[None, :, None]).transpose(0, 2, 1).reshape(nx * 3, nm)
            right = yv.transpose(1, 0, 2).reshape(nm, ny * 3)
            return (left @ right).reshape(nx, 3, ny, 3).transpose(0, 2, 1, 3)

        out = contract(
            self.c,
            self._te_x_factor(xs, guide, upper, deriv=dx),
            self._te_y_factor(ys, guide, upper, deriv=dy),
        )
        out += contract(
            self.d,
            self._tm_x_factor(xs, guide, upper, deriv=dx),
            self._tm_y_factor(ys, guide, upper, deriv=dy),
        )
        return out

    # -- public API ---------------------------------------------------------

    def full(self, x, y) -> np.ndarray:
        """Full-guide dyadic Green function at one point pair, ``(3,3)``."""
        return self._pairs(x, y, _FULL)[0]

    def full_pairs(self, xs, ys) -> np.ndarray:
        return self._pairs(xs, ys, _FULL)

    def half(self, x, y) -> np.ndarray:
        """Terminating-guide dyadic Green function at one point pair."""
        return self._pairs(x, y, _HALF)[0]

    def half_pairs(self, xs, ys) -> np.ndarray:
        """Pairwise evaluation, ``(n,3)`` x ``(n,3) -> (n,3,3)``."""
        return self._pairs(xs, ys, _HALF)

    def half_table(self, xs, ys) -> np.ndarray:
        """All-pairs evaluation ``(nx,3) x (ny,3) -> (nx,ny,3,3)``.

        Requires every ``x3`` on the same side of every ``y3`` (single
        series branch), which is how the forward model uses it.  Recently
        used tables are memoized by input content; treat the returned
        array as read-only.
        """
        xs = modes._as_points(xs)
        ys = modes._as_points(ys)
        key = (xs.tobytes(), ys.tobytes())
        hit = self._table_memo.get(key)
        if hit is not None:
            self._table_memo.move_to_end(key)
            return hit
        table = self._table(xs, ys, _HALF)
        self._table_memo[key] = table
        if len(self._table_memo) > _TABLE_MEMO_SIZE:
            self._table_memo.popitem(last=False)
        return table

    def half_dx3(self, x, y, wrt: str = "x") -> np.ndarray:
        """Term-wise axial derivative of the terminating-guide series.

        ``wrt`` selects differentiation in ``x3`` or ``y3``.
        """
        if wrt not in ("x", "y"):
            raise ValueError("wrt must be 'x' or 'y'")
        return self._pairs(x, y, _HALF, deriv_wrt=wrt)[0]

    def half_dx3_pairs(self, xs, ys, wrt: str = "x") -> np.ndarray:
        if wrt not in ("x", "y"):
            raise ValueError("wrt must be 'x' or 'y'")
        return self._pairs(xs, ys, _HALF, deriv_wrt=wrt)

    def _propagating_evaluator(self) -> "GreenEvaluator":
        # the propagating projection has no truncation constraint, so only
        # exactly coincident planes are rejected
        if self._prop is None:
            self._prop = GreenEvaluator(self.basis.propagating(), 0.0)
        return self._prop

    def re_dx3_propagating(self, x_star, z, axis: int) -> np.ndarray:
        """Propagating projection of ``Re`` of an axial Green derivative.

        Returns the real 3-vector ``(Re d3 G(x_star; z)) e_axis`` summed
        over propagating modes only, with the derivative taken in
        ``x_star3`` when ``x_star3 < z3`` and in ``z3`` otherwise.  This is
        the reference field against which the closed-form point-spread
        field of the imaging module is checked.
        """
        ev = self._propagating_evaluator()
        x_star = np.asarray(x_star, dtype=float)
        z = np.asarray(z, dtype=float)
        wrt = "x" if x_star[2] < z[2] else "y"
        d = ev.half_dx3(x_star, z, wrt=wrt)
        return d[:, axis].real.copy()
