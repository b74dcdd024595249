"""System models and privacy specifications.

A model is an MDP or POMDP over a finite state set. Transition kernels are
stored column-stochastic: H_a[i, j] is the probability of moving to state i
from state j under action a, so a belief column vector updates as H_a @ b.
Observation kernels are row-stochastic: O_a[i, k] is the probability of
observing the k-th observation in state i after action a.

File formats (JSON):

  model:
    {
      "states": ["q1", ...],
      "initial": [0.1, ...],
      "actions": ["a1", ...],
      "transitions": {"a1": [[...], ...]},          # n x n, column-stochastic
      "observations": ["z0", ...],                  # optional
      "observation_fn": {"a1": [[...], ...]},       # optional, n x |Z| rows
      "convention": "target-rows"                   # optional; "source-rows"
    }                                               # accepts row-stochastic
                                                    # tables and transposes

  privacy spec:
    {
      "secret": ["q2", "q3"],
      "lambda": 0.85,
      "initial_set": {"point": [...]}
                   | {"polytope": {"E0": [[...], ...]}}
                   | {"semialgebraic": {"polys": [[{"coeff":..,"monomial":[..]}..], ...]}},
      "horizon": "infinite" | <positive integer>
    }

The polytope rows are halfspaces in the augmented belief (b, 1): the set is
{b : E0 @ (b, 1) >= 0}. Semialgebraic sets are {b : l_i(b) <= 0 for all i}.
"""

from __future__ import annotations

import itertools
import json
import warnings
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import linprog

from .poly import Polynomial

STOCHASTIC_TOL = 1e-9


class ModelFormatError(ValueError):
    """Malformed model or spec document (carries line/column when known)."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
        self.line = line
        self.column = column


class UnsupportedEncodingError(ValueError):
    """Requested a geometric encoding the initial set does not admit."""


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(np.asarray(a, dtype=float))
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Model:
    """Validated MDP or POMDP. Immutable and safe to share across workers."""

    states: tuple[str, ...]
    initial: np.ndarray
    actions: tuple[str, ...]
    transitions: dict[str, np.ndarray]
    observations: Optional[tuple[str, ...]] = None
    observation_fn: Optional[dict[str, np.ndarray]] = None

    def __post_init__(self):
        n = len(self.states)
        if n < 1 or len(set(self.states)) != n:
            raise ModelFormatError("states must be nonempty and unique")
        if len(set(self.actions)) != len(self.actions) or not self.actions:
            raise ModelFormatError("actions must be nonempty and unique")
        object.__setattr__(self, "initial", _frozen(self.initial))
        if self.initial.shape != (n,):
            raise ModelFormatError(
                f"initial distribution has length {self.initial.shape}, expected {n}"
            )
        if np.any(self.initial < -STOCHASTIC_TOL) or np.any(self.initial > 1 + STOCHASTIC_TOL):
            raise ModelFormatError("initial distribution entries must be in [0, 1]")
        if set(self.transitions) != set(self.actions):
            raise ModelFormatError("transitions must cover exactly the action set")
        trans = {}
        for a in self.actions:
            H = _frozen(self.transitions[a])
            if H.shape != (n, n):
                raise ModelFormatError(
                    f"transition matrix for action {a!r} has shape {H.shape}, expected ({n}, {n})"
                )
            if np.any(H < -STOCHASTIC_TOL) or np.any(H > 1 + STOCHASTIC_TOL):
                raise ModelFormatError(f"transition entries for action {a!r} must be in [0, 1]")
            colsums = H.sum(axis=0)
            bad = np.nonzero(np.abs(colsums - 1.0) > STOCHASTIC_TOL)[0]
            if bad.size:
                j = int(bad[0])
                raise ModelFormatError(
                    f"column {j} of the transition matrix for action {a!r} sums to "
                    f"{colsums[j]:.12g}, expected 1"
                )
            trans[a] = H
        object.__setattr__(self, "transitions", trans)

        if (self.observations is None) != (self.observation_fn is None):
            raise ModelFormatError("observations and observation_fn must be given together")
        if self.observations is not None:
            zs = self.observations
            if not zs or len(set(zs)) != len(zs):
                raise ModelFormatError("observations must be nonempty and unique")
            if set(self.observation_fn) != set(self.actions):
                raise ModelFormatError("observation_fn must cover exactly the action set")
            obs = {}
            for a in self.actions:
                O = _frozen(self.observation_fn[a])
                if O.shape != (n, len(zs)):
                    raise ModelFormatError(
                        f"observation matrix for action {a!r} has shape {O.shape}, "
                        f"expected ({n}, {len(zs)})"
                    )
                if np.any(O < -STOCHASTIC_TOL) or np.any(O > 1 + STOCHASTIC_TOL):
                    raise ModelFormatError(
                        f"observation entries for action {a!r} must be in [0, 1]"
                    )
                rowsums = O.sum(axis=1)
                bad = np.nonzero(np.abs(rowsums - 1.0) > STOCHASTIC_TOL)[0]
                if bad.size:
                    i = int(bad[0])
                    raise ModelFormatError(
                        f"row {i} of the observation matrix for action {a!r} sums to "
                        f"{rowsums[i]:.12g}, expected 1"
                    )
                obs[a] = O
            object.__setattr__(self, "observation_fn", obs)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def is_pomdp(self) -> bool:
        return self.observations is not None

    def state_index(self, name: str) -> int:
        try:
            return self.states.index(name)
        except ValueError:
            raise KeyError(f"unknown state {name!r}") from None

    def transition(self, action: str) -> np.ndarray:
        try:
            return self.transitions[action]
        except KeyError:
            raise KeyError(f"unknown action {action!r}") from None

    def observation_matrix(self, action: str) -> np.ndarray:
        if not self.is_pomdp:
            raise KeyError("model has no observations")
        return self.observation_fn[action]

    def observation_index(self, name: str) -> int:
        if not self.is_pomdp:
            raise KeyError("model has no observations")
        try:
            return self.observations.index(name)
        except ValueError:
            raise KeyError(f"unknown observation {name!r}") from None


# --- initial-set descriptions -----------------------------------------------


@dataclass(frozen=True)
class PointBelief:
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "values", _frozen(self.values))


@dataclass(frozen=True)
class BeliefPolytope:
    """Halfspace representation {b : E0 @ (b, 1) >= 0}; E0 is n0 x (n+1)."""

    E0: np.ndarray

    def __post_init__(self):
        E0 = np.atleast_2d(np.asarray(self.E0, dtype=float))
        object.__setattr__(self, "E0", _frozen(E0))

    @property
    def n_rows(self) -> int:
        return self.E0.shape[0]

    def dim(self) -> int:
        return self.E0.shape[1] - 1

    def contains(self, b: np.ndarray, tol: float = 1e-9) -> bool:
        bbar = np.append(np.asarray(b, dtype=float), 1.0)
        return bool(np.all(self.E0 @ bbar >= -tol))

    def vertices(self, tol: float = 1e-9) -> list[np.ndarray]:
        """Enumerate vertices by intersecting subsets of n active halfspaces.

        Intended for the desk-scale sets handled here; the number of
        candidate intersections is C(n_rows, n).
        """
        n = self.dim()
        A = self.E0[:, :n]
        c = self.E0[:, n]
        verts: list[np.ndarray] = []
        for rows in itertools.combinations(range(self.n_rows), n):
            sub = A[list(rows)]
            if abs(np.linalg.det(sub)) < 1e-12:
                continue
            v = np.linalg.solve(sub, -c[list(rows)])
            if np.all(A @ v + c >= -tol):
                if not any(np.allclose(v, w, atol=1e-9) for w in verts):
                    verts.append(v)
        return verts


@dataclass(frozen=True)
class SemialgebraicSet:
    """{b : l_i(b) <= 0 for every i}."""

    polys: tuple[Polynomial, ...]

    def contains(self, b: np.ndarray, tol: float = 1e-9) -> bool:
        return all(p.eval(list(b)) <= tol for p in self.polys)


InitialSet = Union[PointBelief, BeliefPolytope, SemialgebraicSet]


@dataclass(frozen=True)
class UnsafeHalfspace:
    """Privacy-unsafe beliefs {b : w . b > lam} with w the secret indicator."""

    w: np.ndarray
    lam: float

    def __post_init__(self):
        object.__setattr__(self, "w", _frozen(self.w))

    def contains(self, b: np.ndarray) -> bool:
        return float(self.w @ np.asarray(b, dtype=float)) > self.lam


@dataclass(frozen=True)
class PrivacySpec:
    """Secret states, confidence threshold, initial beliefs, and horizon.

    horizon is None for all-time verification, otherwise a positive integer.
    """

    secret_states: tuple[int, ...]
    lam: float
    initial_set: InitialSet
    horizon: Optional[int] = None

    def validate(self, model: Model, check_disjoint: bool = True) -> None:
        n = model.n_states
        if not self.secret_states:
            raise ModelFormatError("secret state set must be nonempty")
        if len(set(self.secret_states)) != len(self.secret_states):
            raise ModelFormatError("secret states must be unique")
        if any(not 0 <= q < n for q in self.secret_states):
            raise ModelFormatError("secret state index out of range")
        if len(self.secret_states) >= n:
            raise ModelFormatError("secret states must be a proper subset of the states")
        if not 0.0 <= self.lam <= 1.0:
            raise ModelFormatError("lambda must lie in [0, 1]")
        if isinstance(self.initial_set, PointBelief):
            if self.initial_set.values.shape != (n,):
                raise ModelFormatError("initial point belief has the wrong dimension")
        elif isinstance(self.initial_set, BeliefPolytope):
            if self.initial_set.dim() != n:
                raise ModelFormatError("initial polytope has the wrong dimension")
        else:
            for p in self.initial_set.polys:
                if p.n_vars != n:
                    raise ModelFormatError("initial-set polynomial has the wrong arity")
        if check_disjoint:
            self._check_disjoint_from_unsafe(model)

    def _check_disjoint_from_unsafe(self, model: Model) -> None:
        hs = unsafe_halfspace(self, model)
        if isinstance(self.initial_set, PointBelief):
            mass = float(hs.w @ self.initial_set.values)
            if mass > self.lam:
                raise ModelFormatError(
                    f"initial belief lies in the unsafe set (secret mass "
                    f"{mass:.6g} > lambda {self.lam:.6g})"
                )
        elif isinstance(self.initial_set, BeliefPolytope):
            # max w.b over the polytope via LP; overlap iff the max exceeds lambda.
            E0 = self.initial_set.E0
            n = model.n_states
            res = linprog(
                c=-hs.w,
                A_ub=-E0[:, :n],
                b_ub=E0[:, n],
                bounds=[(None, None)] * n,
                method="highs",
            )
            if res.status == 3:
                # Unbounded in the unsafe direction: certainly overlaps.
                raise ModelFormatError("initial polytope is unbounded into the unsafe set")
            if res.success and -res.fun > self.lam + 1e-12:
                raise ModelFormatError(
                    f"initial polytope intersects the unsafe set (max secret mass "
                    f"{-res.fun:.6g} > lambda {self.lam:.6g})"
                )
        else:
            for b in _simplex_grid(model.n_states, 2048, seed=0):
                if self.initial_set.contains(b) and hs.contains(b):
                    raise ModelFormatError(
                        "sampled a belief in both the initial set and the unsafe set"
                    )


def _simplex_grid(n: int, count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.dirichlet(np.ones(n), size=count)


# --- geometric encodings ------------------------------------------------------


def unsafe_halfspace(spec: PrivacySpec, model: Model) -> UnsafeHalfspace:
    """Indicator form of the unsafe set: w[i] = 1 exactly for secret states."""
    w = np.zeros(model.n_states)
    w[list(spec.secret_states)] = 1.0
    return UnsafeHalfspace(w=w, lam=spec.lam)


def initial_polytope_matrix(spec: PrivacySpec, model: Model) -> np.ndarray:
    """Halfspace matrix E0 (n0 x (n+1)) with the initial set {b : E0 (b,1) >= 0}.

    A point belief becomes the degenerate polytope of 2n opposing halfspaces.
    """
    n = model.n_states
    init = spec.initial_set
    if isinstance(init, PointBelief):
        rows = []
        for i in range(n):
            e = np.zeros(n + 1)
            e[i] = 1.0
            e[n] = -init.values[i]
            rows.append(e.copy())
            rows.append(-e)
        return np.array(rows)
    if isinstance(init, BeliefPolytope):
        if init.dim() != n:
            raise ModelFormatError(
                f"polytope columns {init.E0.shape[1]} inconsistent with n+1={n + 1}"
            )
        return np.array(init.E0)
    raise UnsupportedEncodingError(
        "semialgebraic initial sets have no polytope encoding"
    )


def initial_sum(spec: PrivacySpec, tol: float = 1e-9) -> Optional[float]:
    """Common coordinate sum of all initial beliefs, or None if it varies.

    Column-stochastic updates conserve the sum, so a common initial sum is an
    invariant of every belief trajectory and can localize the verification
    conditions.
    """
    init = spec.initial_set
    if isinstance(init, PointBelief):
        return float(init.values.sum())
    if isinstance(init, BeliefPolytope):
        verts = init.vertices()
        if not verts:
            return None
        sums = [float(v.sum()) for v in verts]
        if max(sums) - min(sums) <= tol:
            return sums[0]
        return None
    return None


def initial_set_polynomials(spec: PrivacySpec, model: Model) -> list[Polynomial]:
    """Describe the initial set as {b : l_i(b) <= 0}.

    Points expand to paired linear equalities, polytope rows flip sign, and
    semialgebraic sets pass through.
    """
    n = model.n_states
    init = spec.initial_set
    if isinstance(init, SemialgebraicSet):
        return list(init.polys)
    E0 = initial_polytope_matrix(spec, model)
    polys = []
    for row in E0:
        # row . (b, 1) >= 0  ==  l(b) := -(row . (b, 1)) <= 0
        terms = {tuple(np.eye(n, dtype=int)[i]): -row[i] for i in range(n)}
        terms[(0,) * n] = -row[n]
        polys.append(Polynomial(n, terms))
    return polys


# --- parsing and serialization -----------------------------------------------


def _json_load(text: str) -> dict:
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ModelFormatError(f"syntax error: {err.msg}", err.lineno, err.colno) from err


def parse_model(text: str, renormalize: bool = False) -> Model:
    """Parse and validate a model document.

    If the initial distribution does not sum to 1 a warning is emitted; with
    renormalize=True it is scaled to sum 1 instead of being kept verbatim.
    """
    doc = _json_load(text)
    if not isinstance(doc, dict):
        raise ModelFormatError("model document must be a JSON object")
    for key in ("states", "initial", "actions", "transitions"):
        if key not in doc:
            raise ModelFormatError(f"missing required field {key!r}")
    states = tuple(str(s) for s in doc["states"])
    actions = tuple(str(a) for a in doc["actions"])
    initial = np.asarray(doc["initial"], dtype=float)

    convention = doc.get("convention", "target-rows")
    if convention not in ("target-rows", "source-rows"):
        raise ModelFormatError(f"unknown transition convention {convention!r}")
    transitions = {}
    if not isinstance(doc["transitions"], dict):
        raise ModelFormatError("transitions must map action names to matrices")
    for a, mat in doc["transitions"].items():
        H = np.asarray(mat, dtype=float)
        if H.ndim != 2:
            raise ModelFormatError(f"transition matrix for action {a!r} must be 2-D")
        if convention == "source-rows":
            H = H.T.copy()
        transitions[str(a)] = H

    observations = None
    observation_fn = None
    if "observations" in doc or "observation_fn" in doc:
        if "observations" not in doc or "observation_fn" not in doc:
            raise ModelFormatError("observations and observation_fn must be given together")
        observations = tuple(str(z) for z in doc["observations"])
        observation_fn = {
            str(a): np.asarray(mat, dtype=float)
            for a, mat in doc["observation_fn"].items()
        }

    total = float(initial.sum())
    if abs(total - 1.0) > STOCHASTIC_TOL:
        if renormalize:
            if total <= 0:
                raise ModelFormatError("initial distribution has nonpositive total mass")
            warnings.warn(
                f"initial distribution sums to {total:.6g}; renormalizing to 1",
                UserWarning,
                stacklevel=2,
            )
            initial = initial / total
        else:
            warnings.warn(
                f"initial distribution sums to {total:.6g}, not 1; "
                "pass renormalize=True to rescale",
                UserWarning,
                stacklevel=2,
            )

    return Model(
        states=states,
        initial=initial,
        actions=actions,
        transitions=transitions,
        observations=observations,
        observation_fn=observation_fn,
    )


def serialize_model(model: Model) -> str:
    doc = {
        "states": list(model.states),
        "initial": list(model.initial),
        "actions": list(model.actions),
        "transitions": {a: model.transitions[a].tolist() for a in model.actions},
    }
    if model.is_pomdp:
        doc["observations"] = list(model.observations)
        doc["observation_fn"] = {
            a: model.observation_fn[a].tolist() for a in model.actions
        }
    return json.dumps(doc, indent=2)


def parse_privacy_spec(text: str, model: Model, check_disjoint: bool = True) -> PrivacySpec:
    doc = _json_load(text)
    if not isinstance(doc, dict):
        raise ModelFormatError("privacy spec must be a JSON object")
    for key in ("secret", "lambda", "initial_set", "horizon"):
        if key not in doc:
            raise ModelFormatError(f"missing required field {key!r}")
    secret = tuple(model.state_index(str(s)) for s in doc["secret"])
    lam = float(doc["lambda"])

    init_doc = doc["initial_set"]
    if not isinstance(init_doc, dict) or len(init_doc) != 1:
        raise ModelFormatError("initial_set must be a single-key tagged object")
    tag, payload = next(iter(init_doc.items()))
    if tag == "point":
        initial: InitialSet = PointBelief(np.asarray(payload, dtype=float))
    elif tag == "polytope":
        initial = BeliefPolytope(np.asarray(payload["E0"], dtype=float))
    elif tag == "semialgebraic":
        polys = tuple(
            Polynomial.from_json_obj(p, model.n_states) for p in payload["polys"]
        )
        initial = SemialgebraicSet(polys)
    else:
        raise ModelFormatError(f"unknown initial_set tag {tag!r}")

    horizon_doc = doc["horizon"]
    if horizon_doc == "infinite":
        horizon = None
    else:
        horizon = int(horizon_doc)
        if horizon < 1:
            raise ModelFormatError("finite horizon must be a positive integer")

    spec = PrivacySpec(secret_states=secret, lam=lam, initial_set=initial, horizon=horizon)
    spec.validate(model, check_disjoint=check_disjoint)
    return spec


def serialize_privacy_spec(spec: PrivacySpec, model: Model) -> str:
    init = spec.initial_set
    if isinstance(init, PointBelief):
        init_doc = {"point": list(init.values)}
    elif isinstance(init, BeliefPolytope):
        init_doc = {"polytope": {"E0": init.E0.tolist()}}
    else:
        init_doc = {"semialgebraic": {"polys": [p.to_json_obj() for p in init.polys]}}
    doc = {
        "secret": [model.states[q] for q in spec.secret_states],
        "lambda": spec.lam,
        "initial_set": init_doc,
        "horizon": "infinite" if spec.horizon is None else spec.horizon,
    }
    return json.dumps(doc, indent=2)
