"""Finite-statistics simulation of projective tomography.

Counts are multinomial with a fixed number of events per measurement
setting.  Reconstruction is linear inversion to Pauli coordinates followed by the
Frobenius-closest projection onto the set of density matrices.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from . import linalg
from .errors import QSEError
from .states import TwoQubitState, fidelity_matrix, validate

DEFAULT_EVENTS = 50_000
DEFAULT_SAMPLES = 50
AXES = np.eye(3)


@dataclass(frozen=True, eq=False)
class MeasurementSetting:
    """One projective setting: a measurement axis per measured qubit.

    Outcome order is ``(+, -)`` for one qubit and ``(++, +-, -+, --)`` for two.
    """

    bases: tuple[np.ndarray, ...]

    def __post_init__(self):
        bases = tuple(np.asarray(v, dtype=float).reshape(3) for v in self.bases)
        if len(bases) not in (1, 2):
            raise QSEError("a setting measures one or two qubits")
        for v in bases:
            if abs(np.linalg.norm(v) - 1) > 1e-12:
                raise QSEError(f"basis direction must be unit norm, got {v}")
        object.__setattr__(self, "bases", bases)

    @property
    def n_qubits(self) -> int:
        return len(self.bases)

    @property
    def signs(self) -> np.ndarray:
        return np.array(list(itertools.product((1, -1), repeat=self.n_qubits)))


def pauli_settings(n_qubits: int = 2) -> list[MeasurementSetting]:
    """The 3 (one qubit) or 9 (two qubits) Pauli-axis settings."""
    return [MeasurementSetting(combo) for combo in itertools.product(AXES, repeat=n_qubits)]


@dataclass(frozen=True, eq=False)
class CountsRecord:
    setting: MeasurementSetting
    counts: np.ndarray
    total: float

    @classmethod
    def from_probabilities(cls, setting: MeasurementSetting, probs) -> CountsRecord:
        """Infinite-data record: the Born probabilities injected as frequencies."""
        probs = np.asarray(probs, dtype=float)
        return cls(setting, probs, 1.0)

    @property
    def frequencies(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=float) / self.total


def _density(rho) -> np.ndarray:
    return rho.rho if isinstance(rho, TwoQubitState) else linalg.as_matrix(rho)


def born_probabilities(rho, setting: MeasurementSetting) -> np.ndarray:
    rho = _density(rho)
    if rho.shape[0] != 2 ** setting.n_qubits:
        raise QSEError("setting does not match the state's number of qubits")
    probs = []
    for signs in setting.signs:
        proj = np.ones((1, 1), dtype=complex)
        for s, n in zip(signs, setting.bases):
            proj = np.kron(proj, linalg.qubit_matrix(s * n))
        probs.append(np.trace(rho @ proj).real)
    probs = np.clip(probs, 0.0, None)
    return probs / probs.sum()


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def simulate_counts(rho, settings: Sequence[MeasurementSetting], events_per_setting: int,
                    seed) -> list[CountsRecord]:
    """Multinomial outcome counts per setting; deterministic for a fixed seed."""
    if events_per_setting < 1:
        raise QSEError("events_per_setting must be >= 1")
    rng = _rng(seed)
    out = []
    for setting in settings:
        counts = rng.multinomial(events_per_setting, born_probabilities(rho, setting))
        out.append(CountsRecord(setting, counts, events_per_setting))
    return out


def exact_records(rho, settings: Sequence[MeasurementSetting]) -> list[CountsRecord]:
    return [CountsRecord.from_probabilities(s, born_probabilities(rho, s)) for s in settings]


def project_to_simplex(vals) -> np.ndarray:
    """Euclidean projection of a vector onto the probability simplex."""
    v = np.asarray(vals, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    shift = css[rho] / (rho + 1)
    return np.clip(v - shift, 0.0, None)


def project_to_density(rho: np.ndarray) -> np.ndarray:
    """Closest density matrix in Frobenius norm.

    Eigenvectors are kept; the eigenvalues are shifted by a common constant and
    the negative ones clipped to zero so that they sum to one.
    """
    vals, vecs = linalg.hermitian_eig(0.5 * (rho + rho.conj().T))
    vals = project_to_simplex(vals)
    out = (vecs * vals) @ vecs.conj().T
    return 0.5 * (out + out.conj().T)


@dataclass(frozen=True, eq=False)
class ReconstructionResult:
    rho_hat: np.ndarray
    fidelity_to_target: float | None
    diagnostics: dict = field(default_factory=dict)

    @property
    def bloch(self) -> np.ndarray:
        """Bloch vector (single-qubit results only)."""
        return linalg.bloch_vector(self.rho_hat)


def _design(records: Sequence[CountsRecord]) -> tuple[np.ndarray, np.ndarray, int]:
    n_qubits = records[0].setting.n_qubits
    if any(r.setting.n_qubits != n_qubits for r in records):
        raise QSEError("all records must measure the same number of qubits")
    rows, vals = [], []
    for rec in records:
        freq = rec.frequencies
        signs = rec.setting.signs
        if n_qubits == 1:
            (n,) = rec.setting.bases
            rows.append(n)
            vals.append(freq @ signs[:, 0])
            continue
        nA, nB = rec.setting.bases
        zero3, zero9 = np.zeros(3), np.zeros(9)
        rows.append(np.concatenate([nA, zero3, zero9]))
        vals.append(freq @ signs[:, 0])
        rows.append(np.concatenate([zero3, nB, zero9]))
        vals.append(freq @ signs[:, 1])
        rows.append(np.concatenate([zero3, zero3, np.outer(nA, nB).ravel()]))
        vals.append(freq @ (signs[:, 0] * signs[:, 1]))
    return np.array(rows), np.array(vals), n_qubits


def reconstruct_state(records: Sequence[CountsRecord], target=None) -> ReconstructionResult:
    """Linear-inversion estimate projected to a valid density matrix.

    Raises
    ------
    QSEError
        If the settings do not span the full Pauli operator space.
    """
    if not records:
        raise QSEError("no counts to reconstruct from")
    D, y, n_qubits = _design(records)
    unknowns = 3 if n_qubits == 1 else 15
    rank = np.linalg.matrix_rank(D, tol=1e-9)
    if rank < unknowns:
        raise QSEError(f"settings are not informationally complete (rank {rank} < {unknowns})")
    x, *_ = np.linalg.lstsq(D, y, rcond=None)
    if n_qubits == 1:
        raw = linalg.qubit_matrix(x)
    else:
        raw = linalg.pauli_matrix(x[:3], x[3:6], x[6:].reshape(3, 3))
    raw_min = float(np.linalg.eigvalsh(raw)[0])
    rho_hat = project_to_density(raw)
    fid = None
    if target is not None:
        fid = fidelity_matrix(_density(target), rho_hat)
    diagnostics = {
        "raw_min_eigenvalue": raw_min,
        "clipped": raw_min < 0,
        "settings": len(records),
        "events": float(sum(r.total for r in records)),
        "valid": validate(rho_hat).is_valid if n_qubits == 2 else True,
    }
    return ReconstructionResult(rho_hat, fid, diagnostics)


def tomograph_blochs(blochs, events: int, rng: np.random.Generator) -> np.ndarray:
    """Single-qubit Pauli tomography applied row-wise to many Bloch vectors.

    Equivalent to :func:`simulate_counts` + :func:`reconstruct_state` on the
    three Pauli settings, vectorised.  For a qubit, clipping negative
    eigenvalues is a radial projection onto the unit ball.
    """
    r = np.atleast_2d(np.asarray(blochs, dtype=float))
    p_plus = np.clip(0.5 * (1 + r), 0.0, 1.0)
    n_plus = rng.binomial(events, p_plus)
    est = 2 * n_plus / events - 1
    norms = np.linalg.norm(est, axis=1, keepdims=True)
    return np.where(norms > 1, est / np.maximum(norms, 1e-300), est)


def tomograph_state(state, events: int, rng: np.random.Generator) -> ReconstructionResult:
    """Two-qubit tomography with the nine Pauli-pair settings."""
    records = simulate_counts(state, pauli_settings(2), events, rng)
    return reconstruct_state(records, target=state)


@dataclass(frozen=True)
class ExperimentReport:
    samples: int
    seed: int
    means: dict
    stds: dict
    values: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {"samples": self.samples, "seed": self.seed, "mean": self.means, "std": self.stds}


Pipeline = Callable[[np.random.Generator], Mapping[str, float]]


def monte_carlo_errorbars(pipeline: Pipeline, samples: int = DEFAULT_SAMPLES, seed: int = 0
                          ) -> ExperimentReport:
    """Run ``pipeline`` on independent child generators and summarise each output.

    Standard deviations are sample standard deviations (``ddof=1``).
    """
    if samples < 2:
        raise QSEError("need at least two Monte Carlo samples")
    children = np.random.SeedSequence(seed).spawn(samples)
    runs = [dict(pipeline(np.random.default_rng(c))) for c in children]
    keys = list(runs[0])
    values = {k: np.array([run[k] for run in runs], dtype=float) for k in keys}
    means = {k: float(np.mean(v)) for k, v in values.items()}
    stds = {k: float(np.std(v, ddof=1)) for k, v in values.items()}
    return ExperimentReport(samples, seed, means, stds, values)


def fidelity_pipeline(state: TwoQubitState, events: int = DEFAULT_EVENTS) -> Pipeline:
    def run(rng):
        return {"fidelity": tomograph_state(state, events, rng).fidelity_to_target}
    return run


def ellipsoid_pipeline(state: TwoQubitState, party: str = "B|A", events: int = DEFAULT_EVENTS,
                       n_points: int = 1000, method: str = "steered") -> Pipeline:
    """Scalar outputs ``x0, y0, z0, s1, s2, s3`` of a noisy ellipsoid estimate.

    ``method="steered"`` steers along ``n_points`` random directions, runs
    single-qubit tomography on every steered state and fits a quadric.
    ``method="state"`` runs two-qubit tomography and evaluates the ellipsoid
    of the estimate in closed form.
    """
    from . import reconstruct, steering

    if method not in ("steered", "state"):
        raise QSEError(f"unknown ellipsoid pipeline method {method!r}")
    expected = reconstruct.expected_fit_shape(state, party)

    def run(rng):
        if method == "state":
            est = TwoQubitState.from_matrix(tomograph_state(state, events, rng).rho_hat)
            ell = steering.steering_ellipsoid(est, party)
            center, semiaxes = ell.center, ell.semiaxes
        else:
            dirs = rng.normal(size=(n_points, 3))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            pts, _ = steering.steer_directions(state, party, dirs)
            keep = ~np.isnan(pts).any(axis=1)
            noisy = tomograph_blochs(pts[keep], events, rng)
            fit = reconstruct.fit_quadric(noisy)
            res = reconstruct.extract_geometry(fit, noisy, directions=dirs[keep], shape=expected)
            center, semiaxes = res.center, res.semiaxes
        return {"x0": center[0], "y0": center[1], "z0": center[2],
                "s1": semiaxes[0], "s2": semiaxes[1], "s3": semiaxes[2]}

    return run
