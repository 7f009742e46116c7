"""Steered states, steering ellipsoids and steering completeness.

Party labels follow the usual conditional notation: ``"B|A"`` is Bob's
ellipsoid, generated by Alice's measurements; ``"A|B"`` is the reverse.  The
shell-friendly spellings ``B_given_A`` / ``A_given_B`` are accepted too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import linalg
from .errors import DegenerateSteeringError, QSEError
from .states import TwoQubitState

RANK_TOL = 1e-9
DENOM_TOL = 1e-12
POINT_TOL = 1e-9
REACH_RESIDUAL_TOL = 1e-8
NORM_SLACK = 1e-9

PARTIES = ("B|A", "A|B")
_ALIASES = {"B|A": "B|A", "A|B": "A|B", "B_given_A": "B|A", "A_given_B": "A|B"}


def parse_party(party: str) -> str:
    try:
        return _ALIASES[party]
    except KeyError:
        raise QSEError(f"party must be one of {sorted(_ALIASES)}, got {party!r}") from None


def oriented(state: TwoQubitState, party: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``(a, b, G)`` such that steered Bloch vectors are ``(b + G e) / (1 + a.e)``.

    ``a`` belongs to the measuring party, ``b`` to the steered one.
    """
    p = state.pauli
    if parse_party(party) == "B|A":
        return p.a, p.b, p.T.T
    return p.b, p.a, p.T


@dataclass(frozen=True, eq=False)
class PovmElement:
    """Effect ``e0 (1 + e.sigma)`` acting on the measuring qubit."""

    e0: float
    e: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.e, dtype=float).reshape(3)
        norm = float(np.linalg.norm(e))
        if norm > 1 + NORM_SLACK:
            raise QSEError(f"|e| must be <= 1, got {norm:.12g}")
        if norm > 1:
            e = e / norm
        if not -1e-12 <= self.e0 <= 1 + 1e-12:
            raise QSEError(f"e0 must lie in [0, 1], got {self.e0}")
        e.setflags(write=False)
        object.__setattr__(self, "e", e)
        object.__setattr__(self, "e0", float(min(max(self.e0, 0.0), 1.0)))

    @classmethod
    def projector(cls, direction) -> PovmElement:
        """Rank-one projector onto the pure state with Bloch vector ``direction``."""
        d = np.asarray(direction, dtype=float)
        return cls(0.5, d / np.linalg.norm(d))

    @classmethod
    def identity(cls) -> PovmElement:
        return cls(1.0, np.zeros(3))

    def matrix(self) -> np.ndarray:
        return 2 * self.e0 * linalg.qubit_matrix(self.e)

    def to_dict(self) -> dict:
        return {"e0": self.e0, "e": self.e.tolist()}


@dataclass(frozen=True)
class Povm:
    elements: tuple[PovmElement, ...]

    def __post_init__(self):
        elements = tuple(self.elements)
        object.__setattr__(self, "elements", elements)
        s0 = sum(el.e0 for el in elements)
        s1 = sum((el.e0 * el.e for el in elements), np.zeros(3))
        if abs(s0 - 1) > 1e-10 or np.linalg.norm(s1) > 1e-10:
            raise QSEError(
                f"POVM elements do not sum to identity: sum e0 = {s0:.12g}, |sum e0 e| = {np.linalg.norm(s1):.3e}"
            )

    @classmethod
    def projective(cls, direction) -> Povm:
        d = np.asarray(direction, dtype=float)
        return cls((PovmElement.projector(d), PovmElement.projector(-d)))

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)


@dataclass(frozen=True, eq=False)
class SteeredPoint:
    bloch: np.ndarray
    probability: float
    generator: PovmElement


def steered_state(state: TwoQubitState, element: PovmElement, party: str = "B|A") -> SteeredPoint:
    """Conditional Bloch vector of the steered party and its outcome probability.

    Raises
    ------
    DegenerateSteeringError
        If ``1 + a.e`` vanishes, so the outcome never occurs and the steered
        state is undefined.
    """
    a, b, G = oriented(state, party)
    denom = 1 + a @ element.e
    if denom <= DENOM_TOL:
        raise DegenerateSteeringError(
            f"outcome has zero probability (1 + a.e = {denom:.3e}); steered state undefined"
        )
    return SteeredPoint((b + G @ element.e) / denom, element.e0 * denom, element)


def steer_directions(state: TwoQubitState, party: str, directions) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised steering by projectors along each row of ``directions``.

    Returns ``(points, probabilities)``; rows whose outcome has zero
    probability come back as NaN.
    """
    a, b, G = oriented(state, party)
    e = np.atleast_2d(np.asarray(directions, dtype=float))
    denom = 1 + e @ a
    with np.errstate(divide="ignore", invalid="ignore"):
        pts = (b + e @ G.T) / denom[:, None]
    bad = denom <= DENOM_TOL
    pts[bad] = np.nan
    return pts, 0.5 * np.where(bad, 0.0, denom)


@dataclass(frozen=True, eq=False)
class SteeringEllipsoid:
    party: str
    center: np.ndarray
    Q: np.ndarray
    semiaxes: np.ndarray
    axes: np.ndarray
    rank: int

    def to_dict(self) -> dict:
        return {
            "party": self.party,
            "center": self.center.tolist(),
            "Q": self.Q.tolist(),
            "semiaxes": self.semiaxes.tolist(),
            "axes": self.axes.tolist(),
            "rank": self.rank,
        }


def ellipsoid_geometry(a, b, G) -> tuple[np.ndarray, np.ndarray]:
    """Center and orientation matrix of the image of the unit ball under
    ``e -> (b + G e) / (1 + a.e)``.

    Works for any output dimension (rows of ``G``), which the reconstruction
    code uses for in-plane and on-line fits.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    G = np.asarray(G, dtype=float)
    a2 = float(a @ a)
    if a2 >= 1 - POINT_TOL:
        return b.copy(), np.zeros((b.size, b.size))
    k = 1 - a2
    center = (b - G @ a) / k
    M = G - np.outer(b, a)
    Q = M @ (np.eye(3) + np.outer(a, a) / k) @ M.T / k
    return center, 0.5 * (Q + Q.T)


def ellipsoid_from_center_q(party: str, center, Q) -> SteeringEllipsoid:
    vals, vecs = linalg.hermitian_eig(np.asarray(Q, dtype=float))
    vals = np.real(vals)
    vecs = np.real(vecs)
    scale = max(1.0, float(vals[0]))
    nonzero = vals >= RANK_TOL * scale
    semiaxes = np.where(nonzero, np.sqrt(np.clip(vals, 0.0, None)), 0.0)
    return SteeringEllipsoid(party, np.asarray(center, dtype=float), np.asarray(Q, dtype=float),
                             semiaxes, vecs, int(np.count_nonzero(nonzero)))


def steering_ellipsoid(state: TwoQubitState, party: str = "B|A") -> SteeringEllipsoid:
    """Center, orientation matrix, semiaxes and axes of the steering ellipsoid.

    A steering party with a pure reduced state (``a^2 >= 1 - 1e-9``) yields the
    rank-0 point ellipsoid at the steered party's Bloch vector.
    """
    party = parse_party(party)
    center, Q = ellipsoid_geometry(*oriented(state, party))
    return ellipsoid_from_center_q(party, center, Q)


SHAPES = {0: ("point", "none"), 1: ("needle", "length"), 2: ("pancake", "area"), 3: ("ellipsoid", "volume")}


@dataclass(frozen=True)
class ShapeReport:
    shape: str
    measure_kind: str
    measure_value: float


def shape_measure(rank: int, semiaxes) -> ShapeReport:
    s = np.asarray(semiaxes, dtype=float)
    shape, kind = SHAPES[rank]
    if rank == 0:
        value = 0.0
    elif rank == 1:
        value = 2 * s[0]
    elif rank == 2:
        value = math.pi * s[0] * s[1]
    else:
        value = 4 * math.pi / 3 * s[0] * s[1] * s[2]
    return ShapeReport(shape, kind, float(value))


def classify(ellipsoid: SteeringEllipsoid) -> ShapeReport:
    return shape_measure(ellipsoid.rank, ellipsoid.semiaxes)


def sample_surface(state: TwoQubitState, party: str, n: int, seed: int) -> list[SteeredPoint]:
    """Steer along ``n`` random unit directions with projective elements (e0 = 1/2).

    Directions are normalised Gaussian vectors from ``numpy.random.default_rng(seed)``.
    Zero-probability outcomes are dropped.
    """
    if n < 0:
        raise QSEError("n must be non-negative")
    rng = np.random.default_rng(seed)
    dirs = rng.normal(size=(n, 3))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    out = []
    for d in dirs:
        el = PovmElement(0.5, d)
        try:
            out.append(steered_state(state, el, party))
        except DegenerateSteeringError:
            continue
    return out


def zero_discord_geometric(ellipsoid: SteeringEllipsoid, tol: float = 1e-6) -> bool:
    """True when the ellipsoid is a point or a segment lying on a diameter."""
    if ellipsoid.rank == 0:
        return True
    if ellipsoid.rank > 1:
        return False
    u = ellipsoid.axes[:, 0]
    c = ellipsoid.center
    return bool(np.linalg.norm(c - (c @ u) * u) <= tol)


def reach_povm_element(
    state: TwoQubitState, party: str, target_bloch, target_prob: float | None = None
) -> PovmElement | None:
    """Find an element steering to ``target_bloch`` (with ``target_prob`` if given).

    Solves ``(G - r a^T) e = r - b`` in the least-squares sense, taking the
    minimum-norm solution when the system is singular.  Returns ``None`` when
    the residual exceeds 1e-8, ``|e| > 1``, or the requested probability needs
    ``e0`` outside ``[0, 1]``.  Without ``target_prob`` the largest admissible
    weight ``e0 = 1 / (1 + |e|)`` is used.
    """
    a, b, G = oriented(state, party)
    r = np.asarray(target_bloch, dtype=float)
    M = G - np.outer(r, a)
    e, *_ = np.linalg.lstsq(M, r - b, rcond=None)
    if np.linalg.norm(M @ e - (r - b)) > REACH_RESIDUAL_TOL:
        return None
    norm = float(np.linalg.norm(e))
    if norm > 1 + NORM_SLACK:
        return None
    denom = 1 + a @ e
    if denom <= DENOM_TOL:
        return None
    if target_prob is None:
        e0 = 1 / (1 + min(norm, 1.0))
    else:
        e0 = target_prob / denom
        if not -1e-12 <= e0 <= 1 + 1e-12:
            return None
    return PovmElement(e0, e)


@dataclass(frozen=True)
class Decomposition:
    """Convex decomposition ``sum_k w_k r_k`` of a local Bloch vector."""

    parts: tuple[tuple[float, np.ndarray], ...]

    def __post_init__(self):
        parts = tuple((float(w), np.asarray(r, dtype=float).reshape(3)) for w, r in self.parts)
        if not parts:
            raise QSEError("decomposition needs at least one part")
        for w, r in parts:
            if not 0 < w <= 1 + 1e-12:
                raise QSEError(f"weights must lie in (0, 1], got {w}")
            if np.linalg.norm(r) > 1 + 1e-9:
                raise QSEError(f"Bloch vector outside the ball: {r}")
        if abs(sum(w for w, _ in parts) - 1) > 1e-10:
            raise QSEError("weights must sum to 1")
        object.__setattr__(self, "parts", parts)

    @property
    def barycenter(self) -> np.ndarray:
        return sum((w * r for w, r in self.parts), np.zeros(3))


@dataclass(frozen=True)
class CompletenessVerdict:
    complete: bool
    witness: Povm | None = None
    notes: list[dict] = field(default_factory=list)
    margin: float = float("nan")


def _reachability_notes(state, party, decomposition) -> list[dict]:
    notes = []
    for w, r in decomposition.parts:
        el = reach_povm_element(state, party, r, w)
        free = reach_povm_element(state, party, r)
        notes.append({
            "weight": w,
            "bloch": r.tolist(),
            "reachable": free is not None,
            "reachable_with_weight": el is not None,
            "element": None if el is None else el.to_dict(),
        })
    return notes


def check_complete_steering(
    state: TwoQubitState, party: str, decomposition: Decomposition, tol: float = 1e-9
) -> CompletenessVerdict:
    """Search for one POVM whose k-th outcome prepares part k with its weight.

    With ``f_k = e0_k e_k`` the steering and probability conditions are linear
    in ``(e0_k, f_k)``: ``e0_k + a.f_k = w_k`` and ``e0_k b + G f_k = w_k r_k``,
    as are ``sum e0_k = 1`` and ``sum f_k = 0``.  What remains is the cone
    condition ``|f_k| <= e0_k``; the margin ``min_k (e0_k - |f_k|)`` is concave,
    so it is maximised over the affine solution set and compared with ``-tol``.
    """
    a, b, G = oriented(state, party)
    if np.linalg.norm(decomposition.barycenter - b) > 1e-9:
        raise QSEError("decomposition does not average to the local Bloch vector")
    parts = decomposition.parts
    n = len(parts)
    rows, rhs = [], []
    for k, (w, r) in enumerate(parts):
        block = np.zeros((4, 4 * n))
        block[0, 4 * k] = 1.0
        block[0, 4 * k + 1: 4 * k + 4] = a
        block[1:, 4 * k] = b
        block[1:, 4 * k + 1: 4 * k + 4] = G
        rows.append(block)
        rhs.append(np.concatenate([[w], w * r]))
    total = np.zeros((4, 4 * n))
    for k in range(n):
        total[:, 4 * k: 4 * k + 4] = np.eye(4)
    rows.append(total)
    rhs.append(np.array([1.0, 0.0, 0.0, 0.0]))
    A = np.vstack(rows)
    y = np.concatenate(rhs)

    notes = _reachability_notes(state, party, decomposition)
    x0, *_ = np.linalg.lstsq(A, y, rcond=None)
    if np.linalg.norm(A @ x0 - y) > REACH_RESIDUAL_TOL:
        return CompletenessVerdict(False, None, notes, float("-inf"))

    _, sv, vt = np.linalg.svd(A)
    null_rank = int(np.sum(sv > 1e-10 * sv[0]))
    N = vt[null_rank:].T

    def margins(x):
        blocks = x.reshape(n, 4)
        return blocks[:, 0] - np.linalg.norm(blocks[:, 1:], axis=1)

    x = x0
    if N.shape[1]:
        x = _maximise_margin(x0, N, n)
    margin = float(np.min(margins(x)))
    if margin < -tol:
        return CompletenessVerdict(False, None, notes, margin)
    blocks = x.reshape(n, 4)
    elements = []
    for e0, *f in blocks:
        f = np.asarray(f)
        e = f / e0 if e0 > 0 else np.zeros(3)
        elements.append(PovmElement(e0, e))
    return CompletenessVerdict(True, Povm(tuple(elements)), notes, margin)


def _maximise_margin(x0: np.ndarray, N: np.ndarray, n: int) -> np.ndarray:
    dim = N.shape[1]

    def unpack(v):
        return (x0 + N @ v[:dim]).reshape(n, 4), v[dim]

    cons = []
    for k in range(n):
        cons.append({"type": "ineq", "fun": lambda v, k=k: unpack(v)[0][k, 0] - unpack(v)[1]})
        cons.append({
            "type": "ineq",
            "fun": lambda v, k=k: (unpack(v)[0][k, 0] - unpack(v)[1]) ** 2
            - unpack(v)[0][k, 1:] @ unpack(v)[0][k, 1:],
        })
    blocks0 = x0.reshape(n, 4)
    t0 = float(np.min(blocks0[:, 0] - np.linalg.norm(blocks0[:, 1:], axis=1))) - 1.0
    v0 = np.concatenate([np.zeros(dim), [t0]])
    res = minimize(lambda v: -v[dim], v0, method="SLSQP", constraints=cons,
                   bounds=[(None, None)] * dim + [(None, 1.0)],
                   options={"ftol": 1e-14, "maxiter": 500})
    return x0 + N @ res.x[:dim]


def werner_tetrahedron_check(p: float) -> bool:
    """Does a centered sphere of radius ``p`` fit in a tetrahedron inscribed in the Bloch sphere?

    The largest such sphere is the insphere of the regular tetrahedron.
    """
    if not 0 <= p <= 1:
        raise QSEError(f"p must lie in [0, 1], got {p}")
    return p <= tetrahedron_inradius() + 1e-12


def tetrahedron_inradius() -> float:
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) / math.sqrt(3)
    normal = np.cross(v[1] - v[0], v[2] - v[0])
    normal /= np.linalg.norm(normal)
    return float(abs(normal @ v[0]))


def probe_completeness(state: TwoQubitState, party: str, n_directions: int = 12) -> CompletenessVerdict:
    """Look for an incompleteness witness among two-part decompositions.

    Each probe splits the local Bloch vector along a chord of the ellipsoid:
    the two parts sit where the line through the local Bloch vector, along a
    principal axis or an in-span mixture of axes, meets the ellipsoid boundary.
    Returns the first incomplete verdict found, else the verdict of the last
    probe.  A complete result is therefore evidence, not proof.
    """
    from .reconstruct import icosahedron_vertices

    party = parse_party(party)
    ell = steering_ellipsoid(state, party)
    _, b, _ = oriented(state, party)
    if ell.rank == 0:
        return check_complete_steering(state, party, Decomposition(((1.0, b),)))
    span = ell.axes[:, : ell.rank]
    dirs = [span[:, i] for i in range(ell.rank)]
    for v in icosahedron_vertices().directions[:n_directions]:
        d = span @ (span.T @ v)
        if np.linalg.norm(d) > 1e-6:
            dirs.append(d / np.linalg.norm(d))
    verdict = None
    for d in dirs:
        ends = chord_endpoints(ell, b, d)
        if ends is None:
            continue
        (t1, r1), (t2, r2) = ends
        w1 = -t2 / (t1 - t2)
        if not 1e-9 < w1 < 1 - 1e-9:
            continue
        dec = Decomposition(((w1, r1), (1 - w1, r2)))
        verdict = check_complete_steering(state, party, dec)
        if not verdict.complete:
            return verdict
    if verdict is None:
        return check_complete_steering(state, party, Decomposition(((1.0, b),)))
    return verdict


def chord_endpoints(ell: SteeringEllipsoid, point, direction):
    """Parameters and points where ``point + t direction`` meets the ellipsoid boundary."""
    span = ell.axes[:, : ell.rank]
    s = ell.semiaxes[: ell.rank]
    p = span.T @ (np.asarray(point) - ell.center) / s
    d = span.T @ np.asarray(direction) / s
    qa, qb, qc = d @ d, 2 * p @ d, p @ p - 1
    disc = qb * qb - 4 * qa * qc
    if qa < 1e-15 or disc < 0:
        return None
    root = math.sqrt(disc)
    ts = ((-qb + root) / (2 * qa), (-qb - root) / (2 * qa))
    return tuple((t, np.asarray(point) + t * np.asarray(direction)) for t in ts)
