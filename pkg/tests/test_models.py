import json

import numpy as np
import pytest

from beliefbarrier import fixtures
from beliefbarrier.models import (
    BeliefPolytope,
    Model,
    ModelFormatError,
    PointBelief,
    PrivacySpec,
    SemialgebraicSet,
    UnsupportedEncodingError,
    initial_polytope_matrix,
    initial_set_polynomials,
    initial_sum,
    parse_model,
    parse_privacy_spec,
    serialize_model,
    serialize_privacy_spec,
    unsafe_halfspace,
)
from beliefbarrier.poly import Polynomial


@pytest.fixture
def example1_text():
    return fixtures.fixture_text(fixtures.EXAMPLE1_MDP)


@pytest.fixture
def example2_text():
    return fixtures.fixture_text(fixtures.EXAMPLE2_POMDP)


@pytest.fixture
def example1(example1_text):
    with pytest.warns(UserWarning, match="sums to 0.5"):
        return parse_model(example1_text)


@pytest.fixture
def example2(example2_text):
    with pytest.warns(UserWarning):
        return parse_model(example2_text)


class TestParseModel:
    def test_example1_matrices(self, example1):
        H1 = example1.transition("sigma1")
        assert np.allclose(H1[:, 0], [0.15, 0.45, 0.4])
        assert example1.states == ("q1", "q2", "q3")
        assert not example1.is_pomdp

    def test_example2_observations(self, example2):
        assert example2.observations == ("z0", "z1")
        O1 = example2.observation_matrix("sigma1")
        assert np.allclose(O1[0], [0.7, 0.3])

    def test_column_sum_violation_names_action_and_column(self, example1_text):
        doc = json.loads(example1_text)
        doc["transitions"]["sigma1"][0][1] = 0.1  # column 1 now sums to 0.9
        with pytest.raises(ModelFormatError, match="column 1.*sigma1"):
            with pytest.warns(UserWarning):
                parse_model(json.dumps(doc))

    def test_syntax_error_reports_position(self):
        with pytest.raises(ModelFormatError, match=r"line \d+, column \d+"):
            parse_model('{"states": [,]}')

    def test_observation_dimension_mismatch(self, example2_text):
        doc = json.loads(example2_text)
        doc["observation_fn"]["sigma1"] = [[0.7, 0.3], [0.5, 0.5]]
        with pytest.raises(ModelFormatError, match="observation matrix"):
            with pytest.warns(UserWarning):
                parse_model(json.dumps(doc))

    def test_renormalize_scales_initial(self, example1_text):
        with pytest.warns(UserWarning, match="renormalizing"):
            m = parse_model(example1_text, renormalize=True)
        assert np.allclose(m.initial, [0.2, 0.4, 0.4])
        assert m.initial.sum() == pytest.approx(1.0, abs=1e-12)

    def test_source_rows_convention_transposes(self, example1, example1_text):
        doc = json.loads(example1_text)
        doc["convention"] = "source-rows"
        doc["transitions"] = {
            a: np.array(mat).T.tolist() for a, mat in doc["transitions"].items()
        }
        with pytest.warns(UserWarning):
            m = parse_model(json.dumps(doc))
        assert np.allclose(m.transition("sigma1"), example1.transition("sigma1"))

    def test_round_trip_is_bit_exact(self, example2):
        text = serialize_model(example2)
        with pytest.warns(UserWarning):
            again = parse_model(text)
        assert again.states == example2.states
        assert again.actions == example2.actions
        assert again.observations == example2.observations
        for a in example2.actions:
            assert (again.transition(a) == example2.transition(a)).all()
            assert (again.observation_matrix(a) == example2.observation_matrix(a)).all()
        assert (again.initial == example2.initial).all()

    def test_transition_simplex_preservation(self, example2):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            b = rng.dirichlet(np.ones(3))
            a = example2.actions[rng.integers(2)]
            out = example2.transition(a) @ b
            assert abs(out.sum() - 1.0) <= 1e-9
            assert np.all(out >= 0)


class TestPrivacySpec:
    def test_parse_and_unsafe_halfspace(self, example1):
        spec = parse_privacy_spec(
            fixtures.fixture_text(fixtures.EXAMPLE1_GAMMA085), example1
        )
        hs = unsafe_halfspace(spec, example1)
        assert np.allclose(hs.w, [0, 1, 1])
        assert hs.lam == 0.85
        assert spec.horizon is None

    def test_unsafe_halfspace_boundary(self, example1):
        spec = PrivacySpec(
            secret_states=(0,), lam=0.0, initial_set=PointBelief(np.array([0, 1, 0.0]))
        )
        hs = unsafe_halfspace(spec, example1)
        assert np.allclose(hs.w, [1, 0, 0])
        assert hs.contains([0.01, 0.99, 0.0])
        assert not hs.contains([0.0, 1.0, 0.0])

    def test_secret_must_be_proper_subset(self, example1):
        spec = PrivacySpec(
            secret_states=(0, 1, 2), lam=0.5,
            initial_set=PointBelief(np.array([1.0, 0, 0])),
        )
        with pytest.raises(ModelFormatError, match="proper subset"):
            spec.validate(example1)

    def test_point_in_unsafe_set_rejected_when_checked(self, example1):
        spec = PrivacySpec(
            secret_states=(1, 2), lam=0.3,
            initial_set=PointBelief(np.array([0.1, 0.2, 0.2])),
        )
        with pytest.raises(ModelFormatError, match="unsafe"):
            spec.validate(example1, check_disjoint=True)
        spec.validate(example1, check_disjoint=False)

    def test_polytope_overlap_detected_by_lp(self, example1):
        # Box 0 <= b_i <= 1 with b2 allowed up to 1 crosses lambda = 0.5.
        rows = []
        for i in range(3):
            e = np.zeros(4)
            e[i] = 1.0
            rows.append(e.copy())
            e2 = np.zeros(4)
            e2[i] = -1.0
            e2[3] = 1.0
            rows.append(e2)
        spec = PrivacySpec(
            secret_states=(1,), lam=0.5, initial_set=BeliefPolytope(np.array(rows))
        )
        with pytest.raises(ModelFormatError, match="intersects"):
            spec.validate(example1)

    def test_spec_round_trip(self, example2):
        spec = parse_privacy_spec(
            fixtures.fixture_text(fixtures.EXAMPLE2_GAMMA042), example2
        )
        text = serialize_privacy_spec(spec, example2)
        again = parse_privacy_spec(text, example2)
        assert again.secret_states == spec.secret_states
        assert again.lam == spec.lam
        assert (again.initial_set.values == spec.initial_set.values).all()


class TestInitialEncodings:
    def test_point_becomes_six_halfspaces(self, example1):
        spec = PrivacySpec(
            secret_states=(1, 2), lam=0.85,
            initial_set=PointBelief(np.array([1.0, 0.0, 0.0])),
        )
        E0 = initial_polytope_matrix(spec, example1)
        assert E0.shape == (6, 4)
        bbar = np.array([1.0, 0.0, 0.0, 1.0])
        assert np.allclose(E0 @ bbar, 0.0)
        off = np.array([0.9, 0.1, 0.0, 1.0])
        assert (E0 @ off < -1e-12).any()

    def test_polytope_passes_through(self, example1):
        E0 = np.array([[1.0, 0, 0, -0.1], [-1.0, 0, 0, 0.3]])
        spec = PrivacySpec(
            secret_states=(1, 2), lam=0.85, initial_set=BeliefPolytope(E0)
        )
        out = initial_polytope_matrix(spec, example1)
        assert (out == E0).all()

    def test_semialgebraic_has_no_polytope_encoding(self, example1):
        ball = Polynomial(3, {(2, 0, 0): 1.0, (0, 0, 0): -1.0})
        spec = PrivacySpec(
            secret_states=(1, 2), lam=0.85,
            initial_set=SemialgebraicSet((ball,)),
        )
        with pytest.raises(UnsupportedEncodingError):
            initial_polytope_matrix(spec, example1)

    def test_inf_ball_polytope_vertices(self):
        # |b - pi|_inf <= 0.05 around the normalized initial distribution:
        # six axis-aligned faces whose vertices are the 8 corners.
        pi = np.array([0.2, 0.4, 0.4])
        rows = []
        for i in range(3):
            hi = np.zeros(4)
            hi[i] = -1.0
            hi[3] = pi[i] + 0.05
            lo = np.zeros(4)
            lo[i] = 1.0
            lo[3] = -(pi[i] - 0.05)
            rows.extend([hi, lo])
        box = BeliefPolytope(np.array(rows))
        assert box.E0.shape == (6, 4)
        verts = box.vertices()
        assert len(verts) == 8
        expected = {
            tuple(np.round(pi + 0.05 * np.array(s), 9))
            for s in [(sx, sy, sz) for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)]
        }
        got = {tuple(np.round(v, 9)) for v in verts}
        assert got == expected

    def test_initial_sum_invariant(self, example1):
        point = PrivacySpec(
            secret_states=(1, 2), lam=0.85,
            initial_set=PointBelief(np.array([0.1, 0.2, 0.2])),
        )
        assert initial_sum(point) == pytest.approx(0.5)

    def test_initial_set_polynomials_vanish_on_point(self, example1):
        spec = PrivacySpec(
            secret_states=(1, 2), lam=0.85,
            initial_set=PointBelief(np.array([0.1, 0.2, 0.2])),
        )
        polys = initial_set_polynomials(spec, example1)
        assert len(polys) == 6
        for p in polys:
            assert p.eval([0.1, 0.2, 0.2]) == pytest.approx(0.0, abs=1e-12)
        # Away from the point at least one constraint is violated (> 0).
        assert any(p.eval([0.2, 0.2, 0.2]) > 1e-9 for p in polys)
