"""Belief updates, trajectory simulation, and the exhaustive falsifier.

The intruder's belief over states evolves as a switched system indexed by
the observed action (and, for a POMDP, the observation): a linear map
b -> H_a b for MDPs and a normalized Bayesian update for POMDPs. The
falsifier enumerates every label sequence up to a depth and reports the
largest secret mass it reaches, which lower-bounds any threshold that could
ever be certified. It is deterministic by design so it can serve as the
ground-truth oracle for the verifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .models import (
    BeliefPolytope,
    Model,
    PointBelief,
    PrivacySpec,
    SemialgebraicSet,
    unsafe_halfspace,
)

BELIEF_SUM_TOL = 1e-9
NEGATIVE_CLAMP_TOL = 1e-12
ZERO_OBSERVATION_TOL = 1e-12

Label = tuple[str, Optional[str]]


class ZeroProbabilityObservation(ValueError):
    """The observation has probability <= 1e-12 under the current belief."""


class FalsificationBudgetError(RuntimeError):
    """The enumeration tree exceeded the configured node cap."""


def as_belief(values, require_simplex: bool = True) -> np.ndarray:
    """Validate and clean a belief vector.

    Entries in [-1e-12, 0) are floating-point noise and get clamped to 0;
    anything more negative is an error. With require_simplex the entries
    must sum to 1 within 1e-9. Verification against an unnormalized initial
    distribution passes require_simplex=False since the linear MDP update
    conserves whatever the initial mass is.
    """
    b = np.array(values, dtype=float)
    if b.ndim != 1:
        raise ValueError("belief must be a vector")
    if np.any(b < -NEGATIVE_CLAMP_TOL):
        raise ValueError(f"belief has negative entry {b.min():.3e}")
    b[b < 0] = 0.0
    if require_simplex and abs(b.sum() - 1.0) > BELIEF_SUM_TOL:
        raise ValueError(f"belief sums to {b.sum():.12g}, expected 1")
    return b


def mdp_update(model: Model, b, action: str) -> np.ndarray:
    """Belief after observing an action: H_a b."""
    b = as_belief(b, require_simplex=False)
    H = model.transition(action)
    out = H @ b
    out[out < 0] = 0.0
    return out


def pomdp_update(model: Model, b, action: str, observation: str) -> np.ndarray:
    """Bayesian belief after an action and observation.

    The predicted belief H_a b is reweighted by the observation likelihood
    column and normalized. Raises ZeroProbabilityObservation when the
    normalizer is <= 1e-12, meaning the observation cannot occur under the
    current belief.
    """
    b = as_belief(b, require_simplex=False)
    H = model.transition(action)
    O = model.observation_matrix(action)
    z = model.observation_index(observation)
    unnormalized = O[:, z] * (H @ b)
    total = float(unnormalized.sum())
    if total <= ZERO_OBSERVATION_TOL:
        raise ZeroProbabilityObservation(
            f"observation {observation!r} has probability {total:.3e} after "
            f"action {action!r}"
        )
    out = unnormalized / total
    out[out < 0] = 0.0
    return out


def secret_mass(b, spec: PrivacySpec) -> float:
    b = np.asarray(b, dtype=float)
    return float(b[list(spec.secret_states)].sum())


@dataclass(frozen=True)
class Trajectory:
    beliefs: tuple[np.ndarray, ...]
    labels: tuple[Label, ...]
    secret_mass_series: tuple[float, ...]

    def __post_init__(self):
        if len(self.beliefs) != len(self.labels) + 1:
            raise ValueError("trajectory must hold one more belief than labels")

    def to_json_obj(self) -> dict:
        return {
            "beliefs": [list(b) for b in self.beliefs],
            "labels": [
                {"action": a} if z is None else {"action": a, "observation": z}
                for a, z in self.labels
            ],
            "secret_mass": list(self.secret_mass_series),
        }


@dataclass(frozen=True)
class FalsificationWitness:
    trajectory: Trajectory
    violation_time: int
    attained_mass: float

    def to_json_obj(self) -> dict:
        obj = self.trajectory.to_json_obj()
        obj["violation_time"] = self.violation_time
        obj["attained_mass"] = self.attained_mass
        return obj


def _normalize_labels(model: Model, labels: Sequence) -> list[Label]:
    out: list[Label] = []
    for step, lab in enumerate(labels):
        if isinstance(lab, str):
            a, z = lab, None
        else:
            pair = tuple(lab)
            a, z = (pair[0], None) if len(pair) == 1 else pair
        if model.is_pomdp and z is None:
            raise ValueError(f"label {step}: POMDP labels need an observation")
        if not model.is_pomdp and z is not None:
            raise ValueError(f"label {step}: MDP labels cannot carry observations")
        out.append((a, z))
    return out


def simulate(model: Model, b0, labels: Sequence, spec: Optional[PrivacySpec] = None,
             require_simplex: bool = True) -> Trajectory:
    """Run the belief recursion along a label sequence.

    Update errors are re-raised with the failing step index attached. The
    secret-mass series is populated when a privacy spec is given, otherwise
    it is all zeros.
    """
    labels = _normalize_labels(model, labels)
    b = as_belief(b0, require_simplex=require_simplex)
    beliefs = [b]
    for step, (a, z) in enumerate(labels):
        try:
            b = mdp_update(model, b, a) if z is None else pomdp_update(model, b, a, z)
        except (KeyError, ValueError) as err:
            raise type(err)(f"step {step}: {err}") from err
        beliefs.append(b)
    masses = tuple(secret_mass(b, spec) if spec else 0.0 for b in beliefs)
    return Trajectory(beliefs=tuple(beliefs), labels=tuple(labels),
                      secret_mass_series=masses)


def default_sample_grid(
    model: Model, spec: PrivacySpec, interior_samples: int = 64, seed: int = 0
) -> list[np.ndarray]:
    """Initial beliefs to falsify from.

    Point sets give the single point. Polytopes give their vertices plus
    Dirichlet-random interior points; the belief dynamics are nonlinear for
    POMDPs so vertices alone do not dominate, and the result is a heuristic
    lower bound either way, never a certificate.
    """
    init = spec.initial_set
    if isinstance(init, PointBelief):
        return [np.array(init.values)]
    if isinstance(init, BeliefPolytope):
        verts = init.vertices()
        if not verts:
            raise ValueError("initial polytope has no vertices to sample")
        grid = [np.asarray(v) for v in verts]
        rng = np.random.default_rng(seed)
        vmat = np.array(verts)
        for _ in range(interior_samples):
            weights = rng.dirichlet(np.ones(len(verts)))
            grid.append(weights @ vmat)
        return grid
    if isinstance(init, SemialgebraicSet):
        rng = np.random.default_rng(seed)
        samples = rng.dirichlet(np.ones(model.n_states), size=max(interior_samples, 1) * 32)
        grid = [b for b in samples if init.contains(b)]
        if not grid:
            raise ValueError("no simplex sample satisfied the semialgebraic initial set")
        return grid[: max(interior_samples, 1)]
    raise TypeError(f"unsupported initial set {type(init).__name__}")


@dataclass
class _SearchState:
    nodes: int = 0
    best_mass: float = -np.inf
    witness: Optional[FalsificationWitness] = None


def falsify(
    model: Model,
    spec: PrivacySpec,
    depth: int,
    sample_grid: Optional[Sequence[np.ndarray]] = None,
    node_cap: int = 10_000_000,
    interior_samples: int = 64,
    seed: int = 0,
) -> tuple[Optional[FalsificationWitness], float]:
    """Exhaustively enumerate label sequences up to the given depth.

    Returns (witness, lower_bound): the lower bound is the maximum secret
    mass over every visited belief, and the witness (the first violating
    trajectory in enumeration order) is present iff lower_bound > lambda.
    POMDP branches with observation probability <= 1e-12 are skipped; they
    cannot occur. Raises FalsificationBudgetError past node_cap nodes.
    """
    if depth < 0:
        raise ValueError("depth must be >= 0")
    if sample_grid is None:
        sample_grid = default_sample_grid(model, spec, interior_samples, seed)
    hs = unsafe_halfspace(spec, model)
    state = _SearchState()

    def visit(b: np.ndarray, mass: float, path: list[tuple[Label, np.ndarray, float]],
              b0: np.ndarray, mass0: float) -> None:
        if mass > state.best_mass:
            state.best_mass = mass
        if state.witness is None and mass > hs.lam:
            labels = tuple(lab for lab, _, _ in path)
            beliefs = (b0,) + tuple(bb for _, bb, _ in path)
            masses = (mass0,) + tuple(mm for _, _, mm in path)
            state.witness = FalsificationWitness(
                trajectory=Trajectory(beliefs=beliefs, labels=labels,
                                      secret_mass_series=masses),
                violation_time=len(path),
                attained_mass=mass,
            )

    def explore(b: np.ndarray, remaining: int,
                path: list[tuple[Label, np.ndarray, float]],
                b0: np.ndarray, mass0: float) -> None:
        state.nodes += 1
        if state.nodes > node_cap:
            raise FalsificationBudgetError(
                f"enumeration exceeded the node cap of {node_cap}"
            )
        if remaining == 0:
            return
        for a in model.actions:
            predicted = model.transition(a) @ b
            if not model.is_pomdp:
                nxt = np.maximum(predicted, 0.0)
                m = float(nxt[list(spec.secret_states)].sum())
                path.append(((a, None), nxt, m))
                visit(nxt, m, path, b0, mass0)
                explore(nxt, remaining - 1, path, b0, mass0)
                path.pop()
                continue
            O = model.observation_matrix(a)
            for zi, z in enumerate(model.observations):
                unnormalized = O[:, zi] * predicted
                total = float(unnormalized.sum())
                if total <= ZERO_OBSERVATION_TOL:
                    continue
                nxt = np.maximum(unnormalized / total, 0.0)
                m = float(nxt[list(spec.secret_states)].sum())
                path.append(((a, z), nxt, m))
                visit(nxt, m, path, b0, mass0)
                explore(nxt, remaining - 1, path, b0, mass0)
                path.pop()

    for b0 in sample_grid:
        b0 = as_belief(b0, require_simplex=False)
        mass0 = secret_mass(b0, spec)
        visit(b0, mass0, [], b0, mass0)
        explore(b0, depth, [], b0, mass0)

    return state.witness, float(state.best_mass)
