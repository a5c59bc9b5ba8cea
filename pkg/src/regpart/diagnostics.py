"""Verdicts on the singular part: commutation, sectoriality, vertex shifts.

Five statements about a model tie together: (i) the singular part is
sectorial; (ii) ``Q`` commutes with ``Z`` everywhere; (iii) the simplified
(commuting) assembly reproduces the regular part; (iv) the kernel-directed
image of every embedded function collapses to its closed pointwise form;
(v) the singular part of the pure second-order companion is sectorial.
They are equivalent for genuine coefficient fields, and this module decides
each one numerically and cross-checks the verdicts.

Sectoriality over an emulated-infinite family can only be *refuted*
numerically (by exhibiting growth under plane-wave modulation); absence of
growth on the tested family is consistency, not proof.  Verdict entries
therefore carry a ``mode`` of ``"certified-false"`` or ``"consistent-true"``
for (i)/(v), while (ii)-(iv) are plainly decided by residuals.

The module also houses the worked fat-Cantor example generator: a
stage-``n`` Smith-Volterra-Cantor set drives an indicator-coefficient model
whose regular part is a pure multiplication form and whose singular part has
strictly negative vertex on a plateau function.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg

from .completion import (ProbeReport, build_ambient, build_v_subspace,
                         compute_operators, hprime_from_coords,
                         oracle_regular_part, t_pi2_probe)
from .errors import DegenerateBasis, ResolutionTooCoarse, ValidationError
from .grid import GridSpec, TestFunction
from .model import CoefficientSet, eval_form, form_gram
from .pointwise import (SectorParams, frobenius, herm_part, imag_part,
                        pencil_tangent, pinv_sqrt)
from .regularize import (assemble_regular, assemble_regular_commuting,
                         commutator_norms, indicator_projection)

__all__ = [
    "DiagnosticsReport",
    "RealPartReport",
    "VertexReport",
    "check_equivalences",
    "check_realpart_commutation",
    "singular_vertex",
    "regular_sector_tangent",
    "generate_cantor_example",
    "generate_noncommuting_example",
    "default_cantor_grid",
    "cantor_mask",
    "svc_intervals",
    "svc_measure",
]

#: Cell-level threshold below which the commutator is treated as zero.
COMMUTE_TOL = 1e-9

#: Per-cell field-difference threshold for the simplified-assembly verdict.
FIELD_TOL = 1e-9

#: Threshold on the fitted modulation slope above which growth is certified.
PROBE_POSITIVE = 1e-8

#: Default modulation frequencies for the growth probe.
PROBE_LAMBDAS = (5.0, 10.0, 20.0, 40.0, 80.0)


@dataclass(frozen=True)
class VertexReport:
    """Vertex/half-angle search over a basis span, with the minimizing
    coordinate vector as witness."""

    params: SectorParams
    witness: np.ndarray
    certified: bool


@dataclass(frozen=True)
class RealPartReport:
    """Does taking real parts commute with taking regular parts?"""

    ok: bool
    commutator_residual: float
    xy_residual: float
    oracle_max_diff: float | None


@dataclass
class DiagnosticsReport:
    commutator_max: float
    qz_iq_asqrt_max: float
    realpart: RealPartReport
    slope_probe: ProbeReport | None
    as_vertex: VertexReport | None
    aps_vertex: VertexReport | None
    regular_tangent: float
    verdicts: dict


def _relative_field_gap(reg_a, reg_b):
    """Largest per-cell difference between two assemblies, relative to the
    field scale."""
    gaps = []
    for name in ("C_reg", "b_reg", "d_reg", "c0_reg"):
        fa = getattr(reg_a, name)
        fb = getattr(reg_b, name)
        diff = np.abs(fa - fb)
        while diff.ndim > 1:
            diff = diff.max(axis=-1)
        scale = max(1.0, float(np.max(np.abs(fa))), float(np.max(np.abs(fb))))
        gaps.append(float(np.max(diff)) / scale)
    return max(gaps)


def _kernel_image_residual(vs, ops, funcs):
    """Compare ``T pi2 Phi(u)`` against its closed pointwise form
    ``(0, -u QZQ(X+Y)/2 + i u Q(X-Y)/2)`` for each supplied function."""
    if vs.n_singular == 0 or not funcs:
        return 0.0
    vol = vs.ambient.grid.cell_volume
    q, z = vs.q_field, vs.derived.Z_field
    qzq = np.matmul(np.matmul(q, z), q)
    xy_sum = vs.derived.X_field + vs.derived.Y_field
    xy_diff = vs.derived.X_field - vs.derived.Y_field
    tpi2 = ops.T @ ops.pi2
    worst = 0.0
    for i, f in enumerate(funcs):
        _, w_num = hprime_from_coords(vs, tpi2[:, i])
        u = f.cell_values
        w_exp = (-0.5 * u[:, None] * np.einsum("nkl,nl->nk", qzq, xy_sum)
                 + 0.5j * u[:, None] * np.einsum("nkl,nl->nk", q, xy_diff))
        res = np.sqrt(vol * float(np.sum(np.abs(w_num - w_exp) ** 2)))
        scale = max(1.0, np.sqrt(vol * float(np.sum(np.abs(w_exp) ** 2))))
        worst = max(worst, res / scale)
    return worst


def singular_vertex(coeffs_s, basis, tol=1e-9):
    """Vertex and half-angle of a (possibly non-sectorial) coefficient set
    over a basis span.

    Unlike the model-level estimator this never rejects a wide form: if the
    angle bisection hits its cap the report comes back uncertified with the
    cap angle.  The witness is the generalized eigenvector attaining the
    vertex.
    """
    if not basis:
        raise DegenerateBasis("need at least one basis function")
    bmat, mmat = form_gram(coeffs_s, basis)
    mh = herm_part(mmat)
    mw = np.linalg.eigvalsh(mh)
    if mw[0] <= 0 or mw[-1] / mw[0] > 1e12:
        raise DegenerateBasis("basis Gram matrix is numerically singular")
    re_b, im_b = herm_part(bmat), imag_part(bmat)
    w, v = scipy.linalg.eigh(re_b, mh)
    gamma = float(w[0])
    witness = v[:, 0].copy()
    t, certified = pencil_tangent(re_b - gamma * mh, im_b, tol=tol)
    return VertexReport(params=SectorParams(theta=float(np.arctan(t)),
                                            gamma=gamma),
                        witness=witness, certified=certified)


def regular_sector_tangent(reg, rank_eps=1e-12):
    """Largest per-cell sector tangent of the regular second-order field,
    computed as the spectral norm of ``g(A') Im(C') g(A')``."""
    a = herm_part(reg.C_reg)
    g = pinv_sqrt(a, rank_eps=rank_eps)
    zr = np.einsum("nij,njk,nkl->nil", g, imag_part(reg.C_reg), g)
    return float(np.max(np.abs(np.linalg.eigvalsh(herm_part(zr)))))


def check_realpart_commutation(coeffs, derived, s, vs=None, reg=None,
                               funcs=None):
    """Pointwise criterion for ``Re`` and regularization to commute:
    ``QZ = ZQ`` and ``(I+iZ) Q X = (I-iZ) Q Y`` per cell.

    When a built subspace, an assembled regular part and the embedded
    function family are supplied, the verdict is backed by values: the real
    part of the assembled regular form is compared against the abstract
    regular part of the form's real part (same construction run on the
    Hermitian form Gram) over all function pairs; the maximum absolute gap
    is reported.
    """
    q, z = s.Q_field, derived.Z_field
    comm = float(np.max(commutator_norms(s, derived))) if s.Q_field.size \
        else 0.0
    qx = np.einsum("nkl,nl->nk", q, derived.X_field)
    qy = np.einsum("nkl,nl->nk", q, derived.Y_field)
    lhs = qx + 1j * np.einsum("nkl,nl->nk", z, qx)
    rhs = qy - 1j * np.einsum("nkl,nl->nk", z, qy)
    xy_res = float(np.max(np.linalg.norm(lhs - rhs, axis=-1))) if q.size \
        else 0.0
    ok = comm <= COMMUTE_TOL and xy_res <= COMMUTE_TOL

    oracle_gap = None
    if vs is not None and reg is not None and funcs:
        funcs = list(funcs)[:vs.n_funcs]
        ops_h = compute_operators(vs, real_part=True)
        reg_set = reg.regular_set(coeffs.theta, coeffs.K_bound)
        gap = 0.0
        for i, fi in enumerate(funcs):
            for j, fj in enumerate(funcs):
                formula = 0.5 * (eval_form(reg_set, fi, fj).value
                                 + np.conj(eval_form(reg_set, fj, fi).value))
                oracle = oracle_regular_part(ops_h, vs, i, j)
                gap = max(gap, abs(formula - oracle))
        oracle_gap = gap
    return RealPartReport(ok=ok, commutator_residual=comm,
                          xy_residual=xy_res, oracle_max_diff=oracle_gap)


def check_equivalences(coeffs, derived, s, funcs, tau=None, xi=None,
                       lambdas=PROBE_LAMBDAS, gamma0=0.0):
    """Decide the five-way equivalence on one model and report residuals.

    ``funcs`` is the embedded family used for the subspace, the kernel-image
    check and the vertex searches; ``tau``/``xi`` drive the growth probe
    (defaulting to the first function and the all-ones direction).
    """
    funcs = list(funcs)
    ambient = build_ambient(coeffs, derived, gamma0=gamma0)
    vs = build_v_subspace(ambient, coeffs, derived, s.Q_field, funcs)
    ops = compute_operators(vs)

    comm = float(np.max(commutator_norms(s, derived)))
    p = s.P_field
    qzpa = np.matmul(np.matmul(s.Q_field, derived.Z_field),
                     np.matmul(p, derived.Asqrt_field))
    qz_iq = float(np.max(frobenius(qzpa)))

    reg = assemble_regular(coeffs, derived, s)
    reg_c = assemble_regular_commuting(coeffs, derived, s, tol=np.inf)
    field_gap = _relative_field_gap(reg, reg_c)
    kernel_res = _kernel_image_residual(vs, ops, funcs)

    if tau is None and funcs:
        tau = funcs[0]
    if xi is None:
        xi = np.ones(coeffs.dim) / np.sqrt(coeffs.dim)
    probe = t_pi2_probe(vs, tau, xi, lambdas) if tau is not None else None

    realpart = check_realpart_commutation(coeffs, derived, s, vs=vs,
                                          reg=reg, funcs=funcs)

    as_vertex = aps_vertex = None
    if funcs:
        as_vertex = singular_vertex(
            reg.singular_set(coeffs.theta, coeffs.K_bound), funcs)
        from .regularize import pure_second_order_parts
        pure = pure_second_order_parts(coeffs, derived, s)
        aps_vertex = singular_vertex(
            pure.singular_set(coeffs.theta, coeffs.K_bound), funcs)

    probe_positive = (probe is not None and not probe.skipped
                      and probe.slope > PROBE_POSITIVE)
    commuting = comm <= COMMUTE_TOL
    verdicts = {
        "commuting": {"value": commuting, "mode": "certified",
                      "residual": comm},
        "simplified_formula": {"value": field_gap <= FIELD_TOL,
                               "mode": "certified", "residual": field_gap},
        "kernel_image_formula": {"value": kernel_res <= FIELD_TOL,
                                 "mode": "certified", "residual": kernel_res},
        "singular_sectorial": {
            "value": not probe_positive,
            "mode": "certified-false" if probe_positive
            else "consistent-true",
            "residual": 0.0 if probe is None else probe.slope},
        "pure_singular_sectorial": {
            "value": not probe_positive,
            "mode": "certified-false" if probe_positive
            else "consistent-true",
            "residual": 0.0 if probe is None else probe.slope},
    }
    return DiagnosticsReport(
        commutator_max=comm, qz_iq_asqrt_max=qz_iq, realpart=realpart,
        slope_probe=probe, as_vertex=as_vertex, aps_vertex=aps_vertex,
        regular_tangent=regular_sector_tangent(reg), verdicts=verdicts)


# -- worked example ---------------------------------------------------------

def svc_intervals(stage):
    """Closed intervals of the stage-``n`` Smith-Volterra-Cantor set as
    exact fractions: step ``k`` removes the open middle of length ``4^-k``
    from each surviving interval."""
    stage = int(stage)
    if stage < 0:
        raise ValidationError("stage must be >= 0")
    intervals = [(Fraction(0), Fraction(1))]
    for k in range(1, stage + 1):
        gap = Fraction(1, 4 ** k)
        nxt = []
        for lo, hi in intervals:
            mid = (lo + hi) / 2
            nxt.append((lo, mid - gap / 2))
            nxt.append((mid + gap / 2, hi))
        intervals = nxt
    return intervals


def svc_measure(stage):
    """Exact Lebesgue measure ``1 - (1 - 2^-n)/2`` of the stage-``n`` set."""
    stage = int(stage)
    return Fraction(1) - (Fraction(1) - Fraction(1, 2 ** stage)) / 2


def default_cantor_grid(stage, m=2):
    """Aligned 1-D grid on ``[-1, 2]``: ``m * 4^stage`` cells per unit with
    ``m`` even, so every set endpoint (denominator ``2^(2n+1)``) lands on a
    cell edge."""
    if m < 2 or m % 2:
        raise ValidationError("cells-per-unit multiplier m must be even")
    cpu = (4 ** int(stage)) * int(m)
    return GridSpec(dim=1, box=((-1.0, 2.0),), cells_per_axis=(3 * cpu,))


def cantor_mask(stage, grid):
    """Boolean per-cell indicator of the stage-``n`` set on an aligned grid.

    Raises :class:`ResolutionTooCoarse` when the grid cannot resolve the
    removed gaps exactly (cells per unit not a multiple of ``2 * 4^n``).
    """
    if grid.dim != 1 or grid.box != ((-1.0, 2.0),):
        raise ValidationError("the worked example lives on [-1, 2] in 1-D")
    cells = grid.cells_per_axis[0]
    if cells % 3:
        raise ResolutionTooCoarse("cell count must split [-1, 2] into unit "
                                  "thirds")
    cpu = cells // 3
    if cpu % (2 * 4 ** int(stage)):
        raise ResolutionTooCoarse(
            "need a multiple of 2*4^stage = %d cells per unit for exact "
            "alignment, got %d" % (2 * 4 ** int(stage), cpu))
    centers = grid.cell_centers()[:, 0]
    mask = np.zeros(grid.n_cells, dtype=bool)
    for lo, hi in svc_intervals(stage):
        mask |= (centers > float(lo)) & (centers < float(hi))
    return mask


def generate_cantor_example(stage, grid=None, m=2, include_c0=True,
                            max_stage=12):
    """Indicator-coefficient model on a fat Cantor set.

    On the set: unit second-order coefficient, first-order coefficients
    ``+1`` (gradient slot) and ``-1`` (function slot), and zeroth-order
    ``+1`` (dropped when ``include_c0`` is false).  Off the set everything
    vanishes.  The singular directions are the set itself
    (``Q = indicator``), the sector half-angle is ``pi/4`` and the
    domination constant ``1`` — all boundary-tight.

    Returns ``(coeffs, q_field, funcs)`` where ``funcs`` maps names to test
    functions: a plateau equal to one across ``[0, 1]`` and a family of
    bumps, one of which lives entirely in the first removed gap.
    """
    stage = int(stage)
    if stage > max_stage:
        raise ValidationError("stage must be <= %d" % max_stage)
    if grid is None:
        grid = default_cantor_grid(stage, m=m)
    mask = cantor_mask(stage, grid)
    ind = mask.astype(complex)

    n = grid.n_cells
    coeffs = CoefficientSet(
        grid=grid,
        C_field=ind[:, None, None] * np.ones((n, 1, 1)),
        b_field=ind[:, None].copy(),
        d_field=-ind[:, None],
        c0_field=ind.copy() if include_c0 else np.zeros(n, dtype=complex),
        theta=np.pi / 4,
        K_bound=1.0,
    )
    q_field = indicator_projection(grid, mask)

    funcs = {
        "plateau": TestFunction.plateau_1d(grid, 0.0, 1.0),
        "bump_gap": TestFunction.bump(grid, center=[0.5], width=[0.1]),
        "bump_left": TestFunction.bump(grid, center=[0.125], width=[0.1]),
        "bump_right": TestFunction.bump(grid, center=[0.875], width=[0.1]),
        "bump_wide": TestFunction.bump(grid, center=[0.5], width=[0.45]),
        "bump_outside": TestFunction.bump(grid, center=[1.5], width=[0.3]),
    }
    return coeffs, q_field, funcs


def generate_noncommuting_example(grid=None, coupling=0.5, cells=8):
    """Minimal 2-D constant-coefficient model whose singular directions do
    not commute with the skew field.

    ``A = I``, ``Z`` couples the two axes off-diagonally with the given
    strength, and ``Q`` projects onto the first axis, so
    ``QZ(I-Q) != 0`` with norm equal to ``coupling``.  All lower-order
    coefficients vanish and every field is real, which keeps the growth
    probe's ratio exactly affine in ``lambda^2``.
    """
    if grid is None:
        grid = GridSpec(dim=2, box=((0.0, 1.0), (0.0, 1.0)),
                        cells_per_axis=(cells, cells))
    if grid.dim != 2:
        raise ValidationError("the non-commuting example is two-dimensional")
    n = grid.n_cells
    z = np.array([[0.0, coupling], [coupling, 0.0]], dtype=complex)
    c = np.broadcast_to(np.eye(2) + 1j * z, (n, 2, 2)).copy()
    theta = float(np.arctan(abs(coupling))) + 1e-9 if coupling else 0.0
    coeffs = CoefficientSet(
        grid=grid, C_field=c,
        b_field=np.zeros((n, 2), dtype=complex),
        d_field=np.zeros((n, 2), dtype=complex),
        c0_field=np.zeros(n, dtype=complex),
        theta=min(theta, np.pi / 2 - 1e-9), K_bound=1.0)
    q = np.zeros((n, 2, 2), dtype=complex)
    q[:, 0, 0] = 1.0
    return coeffs, q
