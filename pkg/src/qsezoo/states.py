"""The state registry plus entanglement, fidelity, entropy and discord."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import linalg
from .errors import InvalidStateError, QSEError
from .linalg import PauliForm, SY

TRACE_TOL = 1e-10
MIN_EIG_TOL = -1e-9
PPT_TOL = 1e-9
EIG_FLOOR = 1e-14

THETA_RHO1 = math.acos(math.sqrt(2 / 3))
WERNER_PS = (1 / 2, 1 / 3, 1 / 5)

_SYSY = np.kron(SY, SY)


def _ket(*amps) -> np.ndarray:
    return np.asarray(amps, dtype=complex)


def _proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


KET0 = _ket(1, 0)
KET1 = _ket(0, 1)
KETP = _ket(1, 1) / math.sqrt(2)
PSI_MINUS = _ket(0, 1, -1, 0) / math.sqrt(2)
PSI_PLUS = _ket(0, 1, 1, 0) / math.sqrt(2)


@dataclass(frozen=True)
class StateSpec:
    """Which registry state to build, with its parameters.

    ``kind`` is one of ``rho1`` ... ``rho8`` or ``custom``.  Parameters left as
    ``None`` take the registry defaults.
    """

    kind: str
    theta: float | None = None
    p: float | None = None
    matrix: np.ndarray | None = field(default=None, compare=False)

    def resolved(self) -> dict:
        out = {"kind": self.kind}
        if self.kind in ("rho1", "rho3"):
            out["theta"] = self.theta if self.theta is not None else _DEFAULTS[self.kind]["theta"]
        if self.kind in ("rho2", "rho3"):
            out["p"] = self.p if self.p is not None else _DEFAULTS[self.kind]["p"]
        return out


_DEFAULTS = {
    "rho1": {"theta": THETA_RHO1},
    "rho2": {"p": 0.5},
    "rho3": {"theta": 0.3, "p": 0.55},
}

REGISTRY = ("rho1", "rho2", "rho3", "rho4", "rho5", "rho6", "rho7", "rho8")


@dataclass(frozen=True, eq=False)
class TwoQubitState:
    rho: np.ndarray
    pauli: PauliForm
    name: str = "custom"

    @classmethod
    def from_matrix(cls, rho, name: str = "custom") -> TwoQubitState:
        """Validate ``rho`` and wrap it with its cached Pauli form."""
        rho = linalg.as_matrix(rho, dims=(4,))
        diag = validate(rho)
        if not diag.is_valid:
            raise InvalidStateError(f"not a valid density matrix: {diag}")
        rho = 0.5 * (rho + rho.conj().T)
        rho.setflags(write=False)
        return cls(rho, linalg.pauli_decompose(rho), name)

    @classmethod
    def from_pauli(cls, pauli: PauliForm, name: str = "custom") -> TwoQubitState:
        return cls.from_matrix(linalg.pauli_compose(pauli), name)

    @property
    def a(self) -> np.ndarray:
        return self.pauli.a

    @property
    def b(self) -> np.ndarray:
        return self.pauli.b

    @property
    def T(self) -> np.ndarray:
        return self.pauli.T

    def reduced(self, party: str) -> np.ndarray:
        return linalg.partial_trace(self.rho, party)


@dataclass(frozen=True)
class StateDiagnostics:
    hermiticity_defect: float
    trace_defect: float
    min_eigenvalue: float
    is_valid: bool


def _psi1(theta: float) -> np.ndarray:
    return _ket(math.cos(theta), 0, 0, math.sin(theta))


def _check_theta(theta: float) -> None:
    if not 0.0 <= theta <= math.pi / 2:
        raise QSEError(f"theta must lie in [0, pi/2], got {theta}")


def _check_p(p: float) -> None:
    if not 0.0 <= p <= 1.0:
        raise QSEError(f"p must lie in [0, 1], got {p}")


def _registry_matrix(kind: str, theta: float | None, p: float | None) -> np.ndarray:
    if kind == "rho1":
        _check_theta(theta)
        return _proj(_psi1(theta))
    if kind == "rho2":
        _check_p(p)
        return p * _proj(PSI_MINUS) + (1 - p) * np.eye(4) / 4
    if kind == "rho3":
        _check_theta(theta)
        _check_p(p)
        pure = _proj(_psi1(theta))
        rho_theta = linalg.partial_trace(pure, "A")
        return p * pure + (1 - p) * np.kron(rho_theta, np.eye(2) / 2)
    if kind == "rho4":
        k00, k01, k11 = _ket(1, 0, 0, 0), _ket(0, 1, 0, 0), _ket(0, 0, 0, 1)
        return (_proj(k00) + _proj(k11) + 2 * _proj(k01) + 4 * _proj(PSI_PLUS)) / 8
    if kind == "rho5":
        return (_proj(np.kron(KET0, KET0)) + _proj(np.kron(KETP, KET1))) / 2
    if kind == "rho6":
        return (_proj(np.kron(KET0, KET0)) + _proj(np.kron(KET1, KET1))) / 2
    if kind == "rho7":
        return (
            _proj(np.kron(KET0, KET0)) + _proj(np.kron(KET1, KET1)) + _proj(np.kron(KETP, KETP))
        ) / 3
    if kind == "rho8":
        s = linalg.PAULIS
        return (
            3 * np.eye(4) + np.kron(s[2], np.eye(2)) + np.kron(s[0], s[0]) + np.kron(s[1], s[1])
        ) / 12
    raise QSEError(f"unknown state kind {kind!r}")


def make_state(spec: StateSpec | str, **params) -> TwoQubitState:
    """Build a registry state.

    ``spec`` is a :class:`StateSpec` or a registry name; keyword arguments
    ``theta``/``p``/``matrix`` are forwarded when a name is given.

    >>> make_state("rho2", p=1/3).name
    'rho2(p=0.333333)'
    """
    if isinstance(spec, str):
        spec = StateSpec(spec, **params)
    if spec.kind == "custom":
        if spec.matrix is None:
            raise QSEError("custom state needs a matrix")
        return TwoQubitState.from_matrix(spec.matrix, "custom")
    if spec.kind not in REGISTRY:
        raise QSEError(f"unknown state kind {spec.kind!r}")
    res = spec.resolved()
    rho = _registry_matrix(spec.kind, res.get("theta"), res.get("p"))
    return TwoQubitState.from_matrix(rho, _label(res))


def _label(res: dict) -> str:
    defaults = _DEFAULTS.get(res["kind"], {})
    # rho2 is always labelled by p since three registry values coexist
    args = [
        f"{k}={v:.6g}"
        for k, v in res.items()
        if k != "kind" and (res["kind"] == "rho2" or v != defaults[k])
    ]
    return res["kind"] + (f"({', '.join(args)})" if args else "")


def registry_states() -> list[TwoQubitState]:
    """The eight registry states with default parameters (rho2 at p=1/2)."""
    return [make_state(k) for k in REGISTRY]


def zoo_states() -> list[TwoQubitState]:
    """The ten columns of the ellipsoid zoo: rho2 appears at p = 1/2, 1/3, 1/5."""
    out = [make_state("rho1")]
    out += [make_state("rho2", p=p) for p in WERNER_PS]
    out += [make_state(k) for k in REGISTRY[2:]]
    return out


def validate(state) -> StateDiagnostics:
    """Report how far a matrix is from being a density matrix. Never raises on bad input."""
    rho = state.rho if isinstance(state, TwoQubitState) else np.asarray(state, dtype=complex)
    herm = linalg.hermiticity_defect(rho)
    trace_defect = float(abs(np.trace(rho) - 1))
    min_eig = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
    ok = herm <= linalg.HERMITIAN_TOL and trace_defect <= TRACE_TOL and min_eig >= MIN_EIG_TOL
    return StateDiagnostics(herm, trace_defect, min_eig, bool(ok))


def _require_valid(rho: np.ndarray) -> None:
    diag = validate(rho)
    if not diag.is_valid:
        raise InvalidStateError(f"not a valid density matrix: {diag}")


def _psd_sqrt_floored(m: np.ndarray) -> np.ndarray:
    vals, vecs = linalg.hermitian_eig(0.5 * (m + m.conj().T), tol=1e-8)
    vals = np.where(vals > EIG_FLOOR, vals, 0.0)
    return (vecs * np.sqrt(vals)) @ vecs.conj().T


def fidelity_matrix(x, y) -> float:
    """Uhlmann fidelity ``(Tr sqrt(sqrt(x) y sqrt(x)))**2`` of two density matrices.

    Eigenvalues below 1e-14 are treated as exact zeros in both square roots;
    otherwise round-off in rank-deficient inputs leaks in at the 1e-9 level.
    """
    sx = _psd_sqrt_floored(np.asarray(x))
    inner = sx @ np.asarray(y) @ sx
    vals, _ = linalg.hermitian_eig(0.5 * (inner + inner.conj().T), tol=1e-8)
    vals = np.where(vals > EIG_FLOOR, vals, 0.0)
    f = float(np.sum(np.sqrt(vals)) ** 2)
    return min(max(f, 0.0), 1.0)


def fidelity(x: TwoQubitState | np.ndarray, y: TwoQubitState | np.ndarray) -> float:
    xr = x.rho if isinstance(x, TwoQubitState) else np.asarray(x, dtype=complex)
    yr = y.rho if isinstance(y, TwoQubitState) else np.asarray(y, dtype=complex)
    _require_valid(xr)
    _require_valid(yr)
    return fidelity_matrix(xr, yr)


def concurrence(state: TwoQubitState) -> float:
    """Wootters concurrence.

    The square roots of the eigenvalues of ``rho (sy sy) rho* (sy sy)`` equal the
    singular values of ``sqrt(rho) (sy sy) rho* (sy sy) sqrt(rho)``, which is Hermitian.
    """
    rho = state.rho
    tilde = _SYSY @ rho.conj() @ _SYSY
    sr = linalg.matrix_sqrt_psd(rho)
    m = sr @ tilde @ sr
    vals, _ = linalg.hermitian_eig(0.5 * (m + m.conj().T), tol=1e-8)
    lam = np.sqrt(np.clip(vals, 0.0, None))
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


def is_separable_ppt(state: TwoQubitState) -> tuple[bool, float]:
    """PPT test with the transpose on party B; exact for two qubits.

    Returns the verdict and the smallest eigenvalue of the partial transpose.
    """
    pt = linalg.partial_transpose(state.rho, "B")
    vals, _ = linalg.hermitian_eig(pt)
    min_eig = float(vals[-1])
    return min_eig >= -PPT_TOL, min_eig


def _entropy_from_eigs(vals) -> float:
    vals = np.asarray(vals, dtype=float)
    vals = vals[vals > 0]
    return float(max(0.0, -np.sum(vals * np.log2(vals))))


def von_neumann_entropy(rho) -> float:
    """Entropy in bits; ``0 log 0`` is taken as 0."""
    rho = linalg.as_matrix(rho)
    vals, _ = linalg.hermitian_eig(rho)
    return _entropy_from_eigs(vals)


def binary_entropy(x: float) -> float:
    return _entropy_from_eigs([x, 1 - x])


def _qubit_entropy(r: np.ndarray) -> float:
    n = min(float(np.linalg.norm(r)), 1.0)
    return binary_entropy(0.5 * (1 + n))


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` nearly uniform unit vectors on the sphere (golden-angle spiral)."""
    i = np.arange(n) + 0.5
    z = 1 - 2 * i / n
    r = np.sqrt(1 - z**2)
    phi = math.pi * (3 - math.sqrt(5)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def _conditional_entropy(n: np.ndarray, a: np.ndarray, b: np.ndarray, T: np.ndarray) -> float:
    total = 0.0
    for sgn in (1.0, -1.0):
        e = sgn * n
        denom = 1 + a @ e
        p = 0.5 * denom
        if p <= 1e-15:
            continue
        total += p * _qubit_entropy((b + T.T @ e) / denom)
    return total


def _angles_to_vec(theta: float, phi: float) -> np.ndarray:
    st = math.sin(theta)
    return np.array([st * math.cos(phi), st * math.sin(phi), math.cos(theta)])


def min_conditional_entropy(
    pauli: PauliForm, measured_party: str, grid: int = 200, step_tol: float = 1e-6
) -> tuple[float, np.ndarray]:
    """Minimise the post-measurement conditional entropy over projective measurements.

    Coarse Fibonacci grid, then coordinate descent on the spherical angles with
    step halving down to ``step_tol``.
    """
    if measured_party == "A":
        a, b, T = pauli.a, pauli.b, pauli.T
    elif measured_party == "B":
        a, b, T = pauli.b, pauli.a, pauli.T.T
    else:
        raise QSEError(f"measured_party must be 'A' or 'B', got {measured_party!r}")

    dirs = fibonacci_sphere(grid)
    values = [_conditional_entropy(n, a, b, T) for n in dirs]
    best = dirs[int(np.argmin(values))]
    theta = math.acos(max(-1.0, min(1.0, best[2])))
    phi = math.atan2(best[1], best[0])
    f = min(values)
    step = 0.1
    while step > step_tol:
        improved = False
        for d_theta, d_phi in ((step, 0), (-step, 0), (0, step), (0, -step)):
            t2, p2 = theta + d_theta, phi + d_phi
            f2 = _conditional_entropy(_angles_to_vec(t2, p2), a, b, T)
            if f2 < f:
                theta, phi, f = t2, p2, f2
                improved = True
        if not improved:
            step *= 0.5
    return f, _angles_to_vec(theta, phi)


def quantum_discord(state: TwoQubitState, measured_party: str = "A") -> float:
    """Discord in bits with projective measurements on ``measured_party``."""
    s_measured = von_neumann_entropy(state.reduced(measured_party))
    s_joint = von_neumann_entropy(state.rho)
    cond, _ = min_conditional_entropy(state.pauli, measured_party)
    return max(0.0, s_measured - s_joint + cond)
