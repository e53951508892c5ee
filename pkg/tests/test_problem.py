"""Problem statement, admissibility validation and the JSON layout."""

from dataclasses import replace

import numpy as np
import pytest

import cases
from layerode import (
    PerturbationVector,
    ProblemFormatError,
    ProblemSpec,
    ProblemValidationError,
    TimePolynomial,
    load_problem,
    problem_from_dict,
    problem_to_dict,
    sample_A,
    sample_f,
    validate,
)


def test_polynomial_evaluation_and_degree():
    p = TimePolynomial((1.0, 2.0, 3.0))
    assert p(0.0) == 1.0
    assert p(2.0) == 17.0
    assert p.degree == 2
    assert not p.is_constant
    assert TimePolynomial((5.0,)).is_constant
    assert np.array_equal(p.sample([0.0, 1.0]), np.array([1.0, 6.0]))


def test_polynomial_degree_cap():
    with pytest.raises(ProblemFormatError):
        TimePolynomial(tuple(range(18)))


def test_polynomial_rejects_non_finite_coefficients():
    with pytest.raises(ProblemFormatError):
        TimePolynomial((1.0, float("nan")))


def test_eps_must_increase_strictly():
    with pytest.raises(ProblemValidationError) as err:
        PerturbationVector((0.5, 0.25))
    assert err.value.condition == "eps-ordering"


def test_eps_coincident_rejected():
    with pytest.raises(ProblemValidationError) as err:
        PerturbationVector((0.25, 0.25))
    assert err.value.condition == "eps-coincident"


@pytest.mark.parametrize("bad", [0.0, -0.5, 1.5])
def test_eps_out_of_range_rejected(bad):
    with pytest.raises(ProblemValidationError) as err:
        PerturbationVector((bad,))
    assert err.value.condition == "eps-range"


def test_positive_offdiagonal_rejected_with_location():
    spec = ProblemSpec(
        n=2,
        A=cases.constant_matrix([[2.0, 1.0], [-1.0, 2.0]]),
        f=(cases.poly(0.0), cases.poly(0.0)),
        u0=(0.0, 0.0),
        T=1.0,
        eps=(0.25, 0.5),
    )
    with pytest.raises(ProblemValidationError) as err:
        validate(spec)
    assert err.value.condition == "off-diagonal-sign"
    assert (err.value.row, err.value.col) == (1, 2)


def test_weak_row_rejected_with_row_index():
    spec = ProblemSpec(
        n=2,
        A=cases.constant_matrix([[1.0, -2.0], [0.0, 1.0]]),
        f=(cases.poly(0.0), cases.poly(0.0)),
        u0=(0.0, 0.0),
        T=1.0,
        eps=(0.25, 0.5),
    )
    with pytest.raises(ProblemValidationError) as err:
        validate(spec)
    assert err.value.condition == "row-dominance"
    assert err.value.row == 1


def test_dominance_checked_away_from_endpoints():
    # row 1 loses dominance only once t grows past 1: 2 - (1 + t) <= 0
    spec = ProblemSpec(
        n=2,
        A=(
            (cases.poly(2.0), cases.poly(-1.0, -1.0)),
            (cases.poly(0.0), cases.poly(1.0)),
        ),
        f=(cases.poly(0.0), cases.poly(0.0)),
        u0=(0.0, 0.0),
        T=2.0,
        eps=(0.25, 0.5),
    )
    with pytest.raises(ProblemValidationError) as err:
        validate(spec)
    assert err.value.condition == "row-dominance"
    assert err.value.t > 0.9


def test_short_horizon_rejected():
    spec = replace(cases.constant_two_scale(eps=(0.5, 1.0)), T=0.25)
    with pytest.raises(ProblemValidationError) as err:
        validate(spec)
    assert err.value.condition == "horizon"


def test_alpha_is_minimum_row_sum():
    vp = validate(cases.constant_two_scale())
    assert vp.alpha == 2.0
    vp = validate(cases.variable_three_scale())
    assert vp.alpha == 2.0


def test_sampling_shapes():
    spec = cases.variable_three_scale()
    ts = np.linspace(0.0, spec.T, 7)
    assert sample_A(spec, ts).shape == (7, 3, 3)
    assert sample_f(spec, ts).shape == (7, 3)


def test_evaluation_outside_domain_rejected():
    spec = cases.constant_two_scale()
    with pytest.raises(ValueError):
        spec.eval_A(-0.1)
    with pytest.raises(ValueError):
        spec.eval_f(1.5)


def test_json_round_trip():
    spec = cases.variable_three_scale()
    assert problem_from_dict(problem_to_dict(spec)) == spec


def test_unknown_key_rejected_by_name():
    data = problem_to_dict(cases.steady_scalar())
    data["extra"] = 1
    with pytest.raises(ProblemFormatError, match="extra"):
        problem_from_dict(data)


def test_missing_key_named():
    data = problem_to_dict(cases.steady_scalar())
    del data["u0"]
    with pytest.raises(ProblemFormatError, match="u0"):
        problem_from_dict(data)


def test_load_problem_reads_scalar_entries(tmp_path):
    path = tmp_path / "problem.json"
    path.write_text(
        '{"n": 1, "T": 2.0, "eps": [1.0], "u0": [2.0], "A": [[1.0]], "f": [2.0]}',
        encoding="utf-8",
    )
    spec = load_problem(path)
    assert spec == cases.steady_scalar()


def test_load_problem_rejects_bad_json(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{", encoding="utf-8")
    with pytest.raises(ProblemFormatError):
        load_problem(path)


def test_with_eps_replaces_only_parameters():
    spec = cases.constant_two_scale()
    moved = spec.with_eps((0.125, 0.5))
    assert moved.eps[0] == 0.125
    assert moved.A == spec.A and moved.T == spec.T
