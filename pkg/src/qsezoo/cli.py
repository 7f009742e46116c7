"""Command-line front end.

Exit codes: 0 success, 2 usage error, 3 numeric or validation failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__, reconstruct, reports, steering, tomography
from .errors import QSEError
from .states import REGISTRY, StateSpec, make_state, validate

EXIT_USAGE = 2
EXIT_NUMERIC = 3
SIG_DIGITS = 12
MESH_SEGMENTS = (32, 16)


class UsageError(Exception):
    pass


def _round(x):
    """Round floats to 12 significant digits, recursively; arrays become lists."""
    if isinstance(x, np.ndarray):
        return _round(x.tolist())
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if not math.isfinite(x):
            return None
        return float(f"{x:.{SIG_DIGITS}g}") + 0.0
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, complex):
        return [_round(x.real), _round(x.imag)]
    if isinstance(x, dict):
        return {str(k): _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    return x


def _atomic_write(path: str, text: str) -> None:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, out: str | None) -> None:
    if out:
        _atomic_write(out, text)
    else:
        sys.stdout.write(text)


def dump_json(payload: dict) -> str:
    return json.dumps(_round(payload), indent=2, sort_keys=True) + "\n"


def load_state_file(path: str) -> np.ndarray:
    """Read a 4x4 complex matrix stored as nested ``[re, im]`` pairs."""
    with open(path) as fh:
        data = json.load(fh)
    if isinstance(data, dict):
        data = data.get("rho", data.get("matrix"))
    arr = np.asarray(data, dtype=float)
    if arr.shape != (4, 4, 2):
        raise UsageError(f"{path}: expected a 4x4 array of [re, im] pairs, got shape {arr.shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def resolve_state(args):
    name = args.state
    if name in REGISTRY:
        spec = StateSpec(name, theta=args.theta, p=args.p)
        state = make_state(spec)
        # echo the resolved registry defaults in the output config
        resolved = spec.resolved()
        args.theta = resolved.get("theta", args.theta)
        args.p = resolved.get("p", args.p)
        return state
    if os.path.isfile(name):
        return make_state(StateSpec("custom", matrix=load_state_file(name)))
    raise UsageError(f"unknown state {name!r}; expected one of {', '.join(REGISTRY)} or a JSON file")


def _config(args) -> dict:
    skip = {"func"}
    return {k: v for k, v in sorted(vars(args).items()) if k not in skip}


def _envelope(args, result: dict) -> dict:
    return {"tool": "qsezoo", "version": __version__, "config": _config(args), "seed": args.seed,
            "result": result}


def _party(args) -> str:
    return steering.parse_party(args.party)


def _matrix_pairs(m: np.ndarray) -> list:
    return [[[z.real, z.imag] for z in row] for row in np.asarray(m)]


def cmd_state_show(args) -> int:
    state = resolve_state(args)
    diag = validate(state)
    result = {
        "state": state.name,
        "rho": _matrix_pairs(state.rho),
        "pauli": state.pauli.to_dict(),
        "diagnostics": vars(diag),
    }
    _emit(dump_json(_envelope(args, result)), args.out)
    return 0


def cmd_qse_compute(args) -> int:
    state = resolve_state(args)
    result = {"state": state.name, **reports.ellipsoid_summary(state, _party(args))}
    _emit(dump_json(_envelope(args, result)), args.out)
    return 0


def points_csv(points: list[steering.SteeredPoint]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x", "y", "z", "probability"])
    for pt in points:
        writer.writerow([repr(float(v)) for v in (*pt.bloch, pt.probability)])
    return buf.getvalue()


def read_points_csv(path: str) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise UsageError(f"{path}: no points")
    return np.array([[float(r["x"]), float(r["y"]), float(r["z"])] for r in rows])


def ellipsoid_obj(ell: steering.SteeringEllipsoid, segments=MESH_SEGMENTS) -> str:
    """Triangulated surface of an ellipsoid as Wavefront OBJ text."""
    n_lon, n_lat = segments
    frame = ell.axes * ell.semiaxes
    verts = [ell.center + frame @ np.array([0, 0, 1.0])]
    for i in range(1, n_lat):
        theta = math.pi * i / n_lat
        for j in range(n_lon):
            phi = 2 * math.pi * j / n_lon
            unit = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
            verts.append(ell.center + frame @ unit)
    verts.append(ell.center + frame @ np.array([0, 0, -1.0]))
    south = len(verts)
    faces = []

    def ring(i, j):
        return 2 + (i - 1) * n_lon + (j % n_lon)

    for j in range(n_lon):
        faces.append((1, ring(1, j), ring(1, j + 1)))
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j), ring(i + 1, j + 1)
            faces.append((a, c, d))
            faces.append((a, d, b))
    for j in range(n_lon):
        faces.append((south, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)))
    lines = [f"# steering ellipsoid {ell.party}"]
    lines += ["v " + " ".join(f"{c:.{SIG_DIGITS}g}" for c in v) for v in verts]
    lines += [f"f {a} {b} {c}" for a, b, c in faces]
    return "\n".join(lines) + "\n"


def cmd_qse_sample(args) -> int:
    state = resolve_state(args)
    party = _party(args)
    points = steering.sample_surface(state, party, args.n, args.seed)
    if args.format == "csv":
        _emit(points_csv(points), args.out)
    elif args.format == "obj":
        _emit(ellipsoid_obj(steering.steering_ellipsoid(state, party)), args.out)
    else:
        result = {"state": state.name, "party": args.party,
                  "points": [{"bloch": p.bloch, "probability": p.probability} for p in points]}
        _emit(dump_json(_envelope(args, result)), args.out)
    return 0


def cmd_qse_fit(args) -> int:
    if args.points:
        pts = read_points_csv(args.points)
        fit = reconstruct.fit_quadric(pts)
        res = reconstruct.extract_geometry(fit, pts)
        result = {"source": args.points, "fit": res.to_dict()}
    else:
        state = resolve_state(args)
        party = _party(args)
        if args.rotation_seed is None:
            rotation = np.eye(3)
        else:
            rotation = reconstruct.random_rotation(args.rotation_seed)
        dirs = reconstruct.icosahedron_vertices(rotation).directions
        rng = np.random.default_rng(args.seed)
        res = reconstruct.reconstruct_from_directions(
            state, party, dirs, args.events, rng, reconstruct.expected_fit_shape(state, party)
        )
        result = {"state": state.name, "party": args.party, "rotation": rotation,
                  "fit": res.to_dict(), "theory": reports.ellipsoid_summary(state, party)}
    _emit(dump_json(_envelope(args, result)), args.out)
    return 0


def cmd_simulate_tomography(args) -> int:
    state = resolve_state(args)
    rng = np.random.default_rng(args.seed)
    records = tomography.simulate_counts(state, tomography.pauli_settings(2), args.events, rng)
    rec = tomography.reconstruct_state(records, target=state)
    result = {
        "state": state.name,
        "events_per_setting": args.events,
        "counts": [{"bases": [b.tolist() for b in r.setting.bases], "counts": r.counts.tolist()}
                   for r in records],
        "rho_hat": _matrix_pairs(rec.rho_hat),
        "fidelity": rec.fidelity_to_target,
        "diagnostics": rec.diagnostics,
    }
    _emit(dump_json(_envelope(args, result)), args.out)
    return 0


def cmd_report_zoo(args) -> int:
    _emit(dump_json(_envelope(args, {"zoo": reports.zoo_report()})), args.out)
    return 0


def cmd_report_tables(args) -> int:
    result = {
        "fidelities": reports.table_fidelities(args.events, args.samples, args.seed),
        "werner_ellipsoids": reports.table_werner(args.events, args.samples, args.seed, args.n),
        "icosahedron_fits": reports.table_fits(args.events, args.samples, args.seed),
    }
    _emit(dump_json(_envelope(args, result)), args.out)
    return 0


def _add_common(p: argparse.ArgumentParser, state: bool = True) -> None:
    if state:
        p.add_argument("--state", default="rho1", help="registry name (rho1..rho8) or JSON matrix file")
        p.add_argument("--theta", type=float, default=None, help="theta for rho1/rho3 (radians)")
        p.add_argument("--p", type=float, default=None, help="mixing probability for rho2/rho3")
        p.add_argument("--party", default="B_given_A", choices=["B_given_A", "A_given_B"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qsezoo", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qsezoo {__version__}")
    groups = parser.add_subparsers(dest="group", required=True)

    state = groups.add_parser("state").add_subparsers(dest="command", required=True)
    p = state.add_parser("show", help="density matrix, Pauli form and diagnostics")
    _add_common(p)
    p.set_defaults(func=cmd_state_show)

    qse = groups.add_parser("qse").add_subparsers(dest="command", required=True)
    p = qse.add_parser("compute", help="analytic steering ellipsoid")
    _add_common(p)
    p.set_defaults(func=cmd_qse_compute)
    p = qse.add_parser("sample", help="steered points on the ellipsoid surface")
    _add_common(p)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--format", choices=["csv", "json", "obj"], default="csv")
    p.set_defaults(func=cmd_qse_sample)
    p = qse.add_parser("fit", help="icosahedron reconstruction, or fit a CSV point file")
    _add_common(p)
    p.add_argument("--rotation-seed", type=int, default=None)
    p.add_argument("--events", type=int, default=None, help="tomography events per setting (default: exact)")
    p.add_argument("--points", default=None, help="CSV file with x,y,z[,probability] columns")
    p.set_defaults(func=cmd_qse_fit)

    sim = groups.add_parser("simulate").add_subparsers(dest="command", required=True)
    p = sim.add_parser("tomography", help="simulated two-qubit tomography")
    _add_common(p)
    p.add_argument("--events", type=int, default=tomography.DEFAULT_EVENTS)
    p.set_defaults(func=cmd_simulate_tomography)

    rep = groups.add_parser("report").add_subparsers(dest="command", required=True)
    p = rep.add_parser("zoo", help="the full ellipsoid zoo")
    _add_common(p, state=False)
    p.set_defaults(func=cmd_report_zoo)
    p = rep.add_parser("tables", help="fidelity, Werner and icosahedron tables with error bars")
    _add_common(p, state=False)
    p.add_argument("--events", type=int, default=tomography.DEFAULT_EVENTS)
    p.add_argument("--samples", type=int, default=tomography.DEFAULT_SAMPLES)
    p.add_argument("--n", type=int, default=1000, help="steering directions per Werner ellipsoid")
    p.set_defaults(func=cmd_report_tables)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"qsezoo: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (QSEError, np.linalg.LinAlgError) as exc:
        sys.stdout.write(dump_json({"tool": "qsezoo", "version": __version__,
                                    "error": type(exc).__name__, "message": str(exc)}))
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
