"""Assemble the ellipsoid zoo and the Monte Carlo summary tables as plain dicts."""

from __future__ import annotations

import math

import numpy as np

from . import reconstruct, steering, tomography
from .states import (
    WERNER_PS,
    TwoQubitState,
    concurrence,
    is_separable_ppt,
    make_state,
    quantum_discord,
    zoo_states,
)
from .steering import PovmElement

_DISPLAY_PARTY = {"B|A": "B_given_A", "A|B": "A_given_B"}


def zoo_measurement(state: TwoQubitState) -> tuple[PovmElement, PovmElement]:
    """The two-outcome measurement whose steered states mark each zoo panel.

    Computational-basis projectors, except for rho8 which uses the pair
    ``cos(3pi/16)|0> + e^{i pi/10} sin(3pi/16)|1>`` and its orthogonal partner.
    """
    if state.name.startswith("rho8"):
        theta, phi = 3 * math.pi / 8, math.pi / 10
        n = np.array([math.sin(theta) * math.cos(phi), math.sin(theta) * math.sin(phi), math.cos(theta)])
    else:
        n = np.array([0.0, 0.0, 1.0])
    return PovmElement.projector(n), PovmElement.projector(-n)


def _steered_or_none(state, element, party):
    try:
        pt = steering.steered_state(state, element, party)
    except steering.DegenerateSteeringError:
        return {"bloch": None, "probability": 0.0}
    return {"bloch": pt.bloch.tolist(), "probability": pt.probability}


def ellipsoid_summary(state: TwoQubitState, party: str) -> dict:
    ell = steering.steering_ellipsoid(state, party)
    shape = steering.classify(ell)
    out = ell.to_dict()
    out["party"] = _DISPLAY_PARTY[ell.party]
    out.update(
        shape=shape.shape,
        measure_kind=shape.measure_kind,
        measure=shape.measure_value,
        zero_discord_geometric=steering.zero_discord_geometric(ell),
    )
    return out


def zoo_entry(state: TwoQubitState) -> dict:
    separable, min_pt = is_separable_ppt(state)
    entry = {
        "state": state.name,
        "separable": separable,
        "ppt_min_eigenvalue": min_pt,
        "concurrence": concurrence(state),
        "discord_A": quantum_discord(state, "A"),
        "discord_B": quantum_discord(state, "B"),
        "ellipsoids": {},
    }
    e1, e2 = zoo_measurement(state)
    for party in steering.PARTIES:
        summary = ellipsoid_summary(state, party)
        verdict = steering.probe_completeness(state, party)
        summary["complete_steering"] = verdict.complete
        summary["local_bloch"] = steering.oriented(state, party)[1].tolist()
        summary["green_points"] = [_steered_or_none(state, e, party) for e in (e1, e2)]
        entry["ellipsoids"][_DISPLAY_PARTY[party]] = summary
    kind = "Sep." if separable else "Ent."
    comp = "Comp." if entry["ellipsoids"]["B_given_A"]["complete_steering"] else "Incomp."
    entry["type"] = f"{kind} & {comp}"
    return entry


def zoo_report() -> list[dict]:
    return [zoo_entry(s) for s in zoo_states()]


def table_fidelities(events: int, samples: int, seed: int) -> list[dict]:
    rows = []
    for i, state in enumerate(zoo_states()):
        rep = tomography.monte_carlo_errorbars(tomography.fidelity_pipeline(state, events), samples, seed + i)
        rows.append({"state": state.name, "fidelity_mean": rep.means["fidelity"],
                     "fidelity_std": rep.stds["fidelity"]})
    return rows


def table_werner(events: int, samples: int, seed: int, n_points: int = 1000,
                 method: str = "steered") -> list[dict]:
    rows = []
    for i, p in enumerate(WERNER_PS):
        state = make_state("rho2", p=p)
        for j, party in enumerate(("A|B", "B|A")):
            pipe = tomography.ellipsoid_pipeline(state, party, events, n_points, method)
            rep = tomography.monte_carlo_errorbars(pipe, samples, seed + 2 * i + j)
            rows.append({"p": p, "party": _DISPLAY_PARTY[party], "mean": rep.means, "std": rep.stds})
    return rows


FIT_STATES = (("rho4", "volume"), ("rho8", "area"), ("rho6", "length"))


def table_fits(events: int | None, trials: int, seed: int) -> list[dict]:
    rows = []
    for i, (name, _) in enumerate(FIT_STATES):
        state = make_state(name)
        row = {"state": name}
        for j, party in enumerate(("A|B", "B|A")):
            stats = reconstruct.robustness_trial(state, party, trials, events, seed + 2 * i + j)
            theory = steering.classify(steering.steering_ellipsoid(state, party)).measure_value
            row[_DISPLAY_PARTY[party]] = {**stats.to_dict(), "theory": theory}
        rows.append(row)
    return rows
