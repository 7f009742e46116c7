"""Steering-ellipsoid reconstruction from finitely many steered points.

Surface points are fitted with a general quadric.  Degenerate ellipsoids
(ellipses and segments) fall back to a principal-component subspace.  When the
measurement directions that produced the points are known, the fallback fits
the projective steering map ``e -> (b + G e) / (1 + a.e)`` inside that
subspace; this recovers the full ellipse or segment even though projective
measurements only land on its interior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import steering
from .errors import FitError, QSEError
from .states import TwoQubitState

PHI = (1 + math.sqrt(5)) / 2
NULL_TOL = 1e-8
COND_MAX = 1e8
FLAT_TOL = 1e-9
LINE_RATIO = 1e-3

FIT_SHAPES = ("ellipsoid", "ellipse", "line", "point", "indeterminate")
_FROM_STEERING = {"ellipsoid": "ellipsoid", "pancake": "ellipse", "needle": "line", "point": "point"}
_RANK = {"ellipsoid": 3, "ellipse": 2, "line": 1, "point": 0}


@dataclass(frozen=True, eq=False)
class DirectionSet:
    directions: np.ndarray
    provenance: str

    def __len__(self) -> int:
        return len(self.directions)


def _canonical_icosahedron() -> np.ndarray:
    verts = []
    for s1 in (1, -1):
        for s2 in (1, -1):
            base = (0.0, s1 * 1.0, s2 * PHI)
            for shift in range(3):
                verts.append(base[-shift:] + base[:-shift] if shift else base)
    return np.array(verts) / math.sqrt(1 + PHI**2)


def _check_rotation(rotation: np.ndarray) -> np.ndarray:
    R = np.asarray(rotation, dtype=float)
    if R.shape != (3, 3):
        raise QSEError(f"rotation must be 3x3, got {R.shape}")
    if np.max(np.abs(R.T @ R - np.eye(3))) > 1e-10 or abs(np.linalg.det(R) - 1) > 1e-10:
        raise QSEError("rotation must be orthogonal with determinant +1")
    return R


def icosahedron_vertices(rotation=None, provenance: str | None = None) -> DirectionSet:
    """The 12 unit vertices ``(0, +-1, +-phi)`` and cyclic shifts, rotated by ``rotation``."""
    verts = _canonical_icosahedron()
    if rotation is None:
        return DirectionSet(verts, provenance or "icosahedron(identity)")
    R = _check_rotation(rotation)
    return DirectionSet(verts @ R.T, provenance or "icosahedron(rotated)")


def quaternion_to_matrix(q) -> np.ndarray:
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def random_rotation(seed) -> np.ndarray:
    """Haar-uniform rotation from a normalised Gaussian quaternion."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return quaternion_to_matrix(rng.normal(size=4))


def random_directions(n: int, seed) -> DirectionSet:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    d = rng.normal(size=(n, 3))
    return DirectionSet(d / np.linalg.norm(d, axis=1, keepdims=True), f"random({seed})")


@dataclass(frozen=True, eq=False)
class FittedQuadric:
    """Quadric ``x^T A x + beta.x + gamma = 0`` with unit coefficient norm.

    ``null_dim`` counts design singular values below ``1e-8`` of the largest;
    a value above one means the points do not pin down a single quadric.
    """

    A: np.ndarray
    beta: np.ndarray
    gamma: float
    residual_rms: float
    null_dim: int
    singular_values: np.ndarray = field(repr=False)

    @property
    def coefficients(self) -> np.ndarray:
        A = self.A
        return np.array([A[0, 0], A[1, 1], A[2, 2], A[0, 1], A[0, 2], A[1, 2], *self.beta, self.gamma])

    @property
    def degenerate(self) -> bool:
        return self.null_dim > 1


def _quadric_design(points: np.ndarray) -> np.ndarray:
    x, y, z = points.T
    one = np.ones_like(x)
    return np.column_stack([x * x, y * y, z * z, 2 * x * y, 2 * x * z, 2 * y * z, x, y, z, one])


def fit_quadric(points) -> FittedQuadric:
    """Algebraic least-squares quadric through ``points`` (at least nine).

    Minimises the summed squared algebraic residual over unit-norm coefficient
    vectors; the minimiser is the right singular vector of the design matrix
    with the smallest singular value.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise FitError(f"points must have shape (m, 3), got {pts.shape}")
    if len(pts) < 9:
        raise FitError(f"need at least 9 points to fit a quadric, got {len(pts)}")
    D = _quadric_design(pts)
    _, sv, vt = np.linalg.svd(D, full_matrices=True)
    sv_full = np.zeros(10)
    sv_full[: len(sv)] = sv
    v = vt[-1]
    A = np.array([[v[0], v[3], v[4]], [v[3], v[1], v[5]], [v[4], v[5], v[2]]])
    resid = float(np.sqrt(np.mean((D @ v) ** 2)))
    null_dim = int(np.sum(sv_full <= NULL_TOL * sv_full[0]))
    return FittedQuadric(A, v[6:9].copy(), float(v[9]), resid, null_dim, sv_full)


@dataclass(frozen=True, eq=False)
class FitResult:
    shape: str
    center: np.ndarray
    semiaxes: np.ndarray
    axes: np.ndarray
    measure: float
    measure_kind: str
    residual_rms: float
    method: str = "quadric"

    def to_dict(self) -> dict:
        return {
            "shape": self.shape,
            "center": self.center.tolist(),
            "semiaxes": self.semiaxes.tolist(),
            "axes": self.axes.tolist(),
            "measure_kind": self.measure_kind,
            "measure": self.measure,
            "residual_rms": self.residual_rms,
            "method": self.method,
        }


def _result(shape, center, semiaxes, axes, residual, method) -> FitResult:
    s = np.zeros(3)
    s[: len(semiaxes)] = semiaxes
    order = np.argsort(-s, kind="stable")
    s = s[order]
    axes = np.asarray(axes)[:, order]
    report = steering.shape_measure(_RANK[shape], s)
    return FitResult(shape, np.asarray(center, dtype=float), s, axes, report.measure_value,
                     report.measure_kind, float(residual), method)


def _indeterminate(points, residual) -> FitResult:
    return FitResult("indeterminate", np.mean(points, axis=0), np.zeros(3), np.eye(3),
                     float("nan"), "none", float(residual), "none")


def quadric_ellipsoid(fit: FittedQuadric):
    """Center, semiaxes, axes of a fitted quadric, or ``None`` if it is not a usable ellipsoid."""
    A, beta, gamma = fit.A, fit.beta, fit.gamma
    if np.trace(A) < 0:
        A, beta, gamma = -A, -beta, -gamma
    vals, vecs = np.linalg.eigh(A)
    if vals[0] <= 0 or vals[-1] / vals[0] > COND_MAX:
        return None
    center = -0.5 * np.linalg.solve(A, beta)
    k = center @ A @ center - gamma
    if k <= 0:
        return None
    return center, np.sqrt(k / vals), vecs


def fit_steering_map(coords, directions):
    """Least-squares projective map ``y (1 + a.e) = beta + G e`` from known directions.

    Returns ``(a, beta, G)`` for ``k``-dimensional coordinates ``y``.
    """
    y = np.atleast_2d(np.asarray(coords, dtype=float))
    e = np.asarray(directions, dtype=float)
    m, k = y.shape
    n_unknown = 3 + k + 3 * k
    rows = np.zeros((m * k, n_unknown))
    rhs = np.zeros(m * k)
    for i in range(k):
        r = slice(i * m, (i + 1) * m)
        rows[r, 0:3] = y[:, [i]] * e
        rows[r, 3 + i] = -1.0
        rows[r, 3 + k + 3 * i: 3 + k + 3 * i + 3] = -e
        rhs[r] = -y[:, i]
    sol, *_ = np.linalg.lstsq(rows, rhs, rcond=None)
    resid = rows @ sol - rhs
    a = sol[:3]
    beta = sol[3: 3 + k]
    G = sol[3 + k:].reshape(k, 3)
    return a, beta, G, float(np.sqrt(np.mean(resid**2)))


def _principal_frame(points: np.ndarray):
    mean = points.mean(axis=0)
    _, sv, vt = np.linalg.svd(points - mean, full_matrices=True)
    sv_full = np.zeros(3)
    sv_full[: len(sv)] = sv
    return mean, sv_full, vt.T


def _conic_in_plane(y: np.ndarray):
    """Algebraic conic fit in 2-D; returns (center, semiaxes, axes) or None."""
    if len(y) < 5:
        return None
    u, v = y.T
    D = np.column_stack([u * u, v * v, 2 * u * v, u, v, np.ones_like(u)])
    _, _, vt = np.linalg.svd(D)
    c = vt[-1]
    A = np.array([[c[0], c[2]], [c[2], c[1]]])
    beta, gamma = c[3:5], c[5]
    if np.trace(A) < 0:
        A, beta, gamma = -A, -beta, -gamma
    vals, vecs = np.linalg.eigh(A)
    if vals[0] <= 0:
        return None
    center = -0.5 * np.linalg.solve(A, beta)
    k = center @ A @ center - gamma
    if k <= 0:
        return None
    return center, np.sqrt(k / vals), vecs, float(np.sqrt(np.mean((D @ c) ** 2)))


def _subspace_fit(points, directions, basis, origin, rank: int):
    """Ellipse/segment from the projective map restricted to ``rank`` principal directions."""
    U = basis[:, :rank]
    y = (points - origin) @ U
    a, beta, G, resid = fit_steering_map(y, directions)
    c_local, Q_local = steering.ellipsoid_geometry(a, beta, G)
    vals, vecs = np.linalg.eigh(Q_local)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    semi = np.sqrt(np.clip(vals, 0.0, None))
    axes = U @ vecs
    return origin + U @ c_local, semi, axes, resid


def _complete_axes(axes: np.ndarray) -> np.ndarray:
    """Extend orthonormal columns to a right-handed 3x3 frame."""
    k = axes.shape[1]
    if k == 3:
        return axes
    q, _ = np.linalg.qr(np.column_stack([axes, np.eye(3)]))
    frame = q[:, :3].copy()
    frame[:, :k] = axes
    return frame


def auto_shape(fit: FittedQuadric, points: np.ndarray) -> str:
    _, sv, _ = _principal_frame(points)
    if sv[0] <= 1e-12:
        return "point"
    if sv[1] <= FLAT_TOL * sv[0]:
        return "line"
    if sv[2] <= FLAT_TOL * sv[0]:
        return "ellipse"
    if not fit.degenerate and quadric_ellipsoid(fit) is not None:
        return "ellipsoid"
    return "line" if sv[1] <= LINE_RATIO * sv[0] else "ellipse"


def extract_geometry(fit: FittedQuadric, points, directions=None, shape: str | None = None
                     ) -> FitResult:
    """Turn a fitted quadric (plus fallbacks) into center, semiaxes and a measure.

    Parameters
    ----------
    fit : FittedQuadric
        Output of :func:`fit_quadric` on ``points``.
    points : array_like, shape (m, 3)
        The steered Bloch vectors.
    directions : array_like, shape (m, 3), optional
        Measurement directions that produced ``points``.  Required to recover
        degenerate ellipsoids exactly, since projective measurements do not
        reach their boundary.
    shape : str, optional
        Force the fitted family (``ellipsoid``, ``ellipse``, ``line``,
        ``point``).  Chosen automatically from rank tests when omitted.
    """
    pts = np.asarray(points, dtype=float)
    dirs = None if directions is None else np.asarray(directions, dtype=float)
    if shape is None:
        shape = auto_shape(fit, pts)
    if shape not in _RANK:
        raise QSEError(f"unknown fit shape {shape!r}")
    origin, sv, basis = _principal_frame(pts)

    if shape == "point":
        return _result("point", origin, [], np.eye(3), sv[0] / math.sqrt(len(pts)), "mean")

    if shape == "ellipsoid":
        geo = quadric_ellipsoid(fit) if not fit.degenerate else None
        if geo is not None:
            center, semi, axes = geo
            return _result("ellipsoid", center, semi, axes, fit.residual_rms, "quadric")
        if dirs is None:
            return _indeterminate(pts, fit.residual_rms)
        center, semi, axes, resid = _subspace_fit(pts, dirs, basis, origin, 3)
        return _result("ellipsoid", center, semi, axes, resid, "projective")

    rank = _RANK[shape]
    if dirs is not None:
        center, semi, axes, resid = _subspace_fit(pts, dirs, basis, origin, rank)
        return _result(shape, center, semi, _complete_axes(axes), resid, "projective")

    if shape == "ellipse":
        if np.sum(sv > FLAT_TOL * sv[0]) < 2:
            return _indeterminate(pts, fit.residual_rms)
        U = basis[:, :2]
        conic = _conic_in_plane((pts - origin) @ U)
        if conic is None:
            return _indeterminate(pts, fit.residual_rms)
        c2, semi, vecs, resid = conic
        return _result("ellipse", origin + U @ c2, semi, _complete_axes(U @ vecs), resid, "conic")

    u = basis[:, 0]
    t = (pts - origin) @ u
    lo, hi = float(t.min()), float(t.max())
    center = origin + 0.5 * (lo + hi) * u
    resid = float(np.sqrt(np.mean(np.sum(((pts - origin) - np.outer(t, u)) ** 2, axis=1))))
    return _result("line", center, [0.5 * (hi - lo)], _complete_axes(u[:, None]), resid, "extent")


def expected_fit_shape(state: TwoQubitState, party: str) -> str:
    """Fit family matching the analytic ellipsoid's rank."""
    ell = steering.steering_ellipsoid(state, party)
    return _FROM_STEERING[steering.classify(ell).shape]


def reconstruct_from_directions(state: TwoQubitState, party: str, directions,
                                events: int | None = None, rng=None,
                                shape: str | None = None) -> FitResult:
    """Steer along ``directions``, optionally add tomography noise, fit and extract."""
    from .tomography import tomograph_blochs

    dirs = np.asarray(directions, dtype=float)
    pts, _ = steering.steer_directions(state, party, dirs)
    keep = ~np.isnan(pts).any(axis=1)
    pts, dirs = pts[keep], dirs[keep]
    if events is not None:
        pts = tomograph_blochs(pts, events, rng)
    fit = fit_quadric(pts)
    return extract_geometry(fit, pts, directions=dirs, shape=shape)


@dataclass(frozen=True)
class RobustnessStats:
    trials: int
    measure_kind: str
    measure_mean: float
    measure_std: float
    records: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "trials": self.trials,
            "measure_kind": self.measure_kind,
            "measure_mean": self.measure_mean,
            "measure_std": self.measure_std,
        }


def robustness_trial(state: TwoQubitState, party: str, trials: int = 50,
                     noise: int | None = None, seed: int = 0) -> RobustnessStats:
    """Reconstruct the ellipsoid from randomly rotated icosahedra.

    Parameters
    ----------
    noise : int, optional
        Tomography events per Pauli setting for every steered state; ``None``
        uses the exact steered Bloch vectors.

    Each trial draws its own child generator from ``SeedSequence(seed)``; the
    fit family is fixed by the analytic ellipsoid's rank.
    """
    if trials < 1:
        raise QSEError("trials must be >= 1")
    shape = expected_fit_shape(state, party)
    records = []
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(trials)):
        rng = np.random.default_rng(child)
        R = random_rotation(rng)
        dirs = icosahedron_vertices(R).directions
        res = reconstruct_from_directions(state, party, dirs, noise, rng, shape)
        records.append({"trial": i, "measure": res.measure, "center": res.center.tolist(),
                        "semiaxes": res.semiaxes.tolist(), "shape": res.shape})
    values = np.array([r["measure"] for r in records])
    mean = float(np.mean(values))
    std = float(np.sqrt(np.mean((values - mean) ** 2))) if trials > 1 else 0.0
    kind = steering.SHAPES[_RANK[shape]][1]
    return RobustnessStats(trials, kind, mean, std, records)
