import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from omrkit.classifiers import classify_nbc
from omrkit.classifiers.nbc import NbcModel
from omrkit.grading import award
from omrkit.registration import Transform
from omrkit.types import AnswerClass

C, X, E = AnswerClass.CONFIRMED, AnswerClass.CROSSED_OUT, AnswerClass.EMPTY


@st.composite
def affine_params(draw):
    theta = draw(st.floats(-math.pi / 6, math.pi / 6))
    scale = draw(st.floats(0.7, 1.4))
    tx = draw(st.floats(-50, 50))
    ty = draw(st.floats(-50, 50))
    shear = draw(st.floats(-0.2, 0.2))
    return theta, scale, tx, ty, shear


@given(affine_params(),
       st.lists(st.tuples(st.floats(-500, 500), st.floats(-500, 500)),
                min_size=1, max_size=20))
@settings(max_examples=200, deadline=None)
def test_transform_round_trip(params, points):
    theta, scale, tx, ty, shear = params
    c, s = math.cos(theta), math.sin(theta)
    matrix = np.array([
        [scale * c, -scale * s + shear, tx],
        [scale * s, scale * c, ty],
        [0.0, 0.0, 1.0],
    ])
    t = Transform(matrix=matrix)
    pts = np.asarray(points, dtype=np.float64)
    back = t.inverse().apply(t.apply(pts))
    assert np.allclose(back, pts, atol=1e-6)


@given(st.lists(st.floats(0.01, 10.0), min_size=3, max_size=3),
       st.floats(0.1, 10.0),
       st.lists(st.floats(-3, 3), min_size=4, max_size=4))
@settings(max_examples=200, deadline=None)
def test_nbc_prior_scaling_keeps_argmax(priors, factor, feature):
    """Multiplying all class priors by one constant cannot change the argmax."""
    classes = (C, X, E)
    d = 4
    rng = np.random.default_rng(0)
    means = rng.normal(size=(3, d))
    variances = rng.uniform(0.5, 2.0, size=(3, d))

    def model(prior_vec):
        return NbcModel(classes=classes, means=means, variances=variances,
                        priors=np.asarray(prior_vec, dtype=np.float64))

    x = np.asarray(feature)
    a = classify_nbc(model(priors), x)
    b = classify_nbc(model([p * factor for p in priors]), x)
    assert a.predicted == b.predicted


@given(st.lists(st.sampled_from([C, X, E]), min_size=2, max_size=6),
       st.data())
@settings(max_examples=300, deadline=None)
def test_award_monotone_in_wrong_confirmed(labels, data):
    correct = data.draw(st.integers(0, len(labels) - 1))
    base = award(list(labels), correct, 1.0)
    for i, cls in enumerate(labels):
        if cls == C and i != correct:
            flipped = list(labels)
            flipped[i] = E
            assert award(flipped, correct, 1.0) >= base


@given(st.lists(st.sampled_from([C, X, E]), min_size=2, max_size=6),
       st.integers(0, 5), st.floats(0.01, 100.0))
@settings(max_examples=300, deadline=None)
def test_award_is_zero_or_weight(labels, correct_raw, weight):
    correct = correct_raw % len(labels)
    got = award(list(labels), correct, weight)
    assert got in (0.0, weight)
