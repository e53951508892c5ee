"""Problem data for stiff linear systems E u' + A(t) u = f(t) on [0, T].

Matrix and forcing entries are polynomials in t, which keeps the file format
trivial and admissibility checks cheap. Validation establishes the sign and
dominance structure of A(t) that the stepping operator's monotonicity relies
on, and extracts the decay rate alpha used to place mesh transition points.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial import polynomial as npoly

__all__ = [
    "MAX_POLY_DEGREE",
    "DEFAULT_SAMPLE_COUNT",
    "ProblemFormatError",
    "ProblemValidationError",
    "TimePolynomial",
    "PerturbationVector",
    "ProblemSpec",
    "ValidatedProblem",
    "validate",
    "sample_A",
    "sample_f",
    "problem_from_dict",
    "problem_to_dict",
    "load_problem",
]

MAX_POLY_DEGREE = 16
DEFAULT_SAMPLE_COUNT = 1024


class ProblemFormatError(ValueError):
    """Problem file or constructor data is malformed."""


class ProblemValidationError(ValueError):
    """Problem data violates an admissibility condition.

    Attributes
    ----------
    condition : str
        Machine-readable tag: 'off-diagonal-sign', 'row-dominance',
        'alpha-positive', 'horizon', 'eps-range', 'eps-ordering' or
        'eps-coincident'.
    row, col : int or None
        1-based indices of the offending entry, when applicable.
    t : float or None
        Sample time of the violation, when applicable.
    """

    def __init__(self, condition, message, row=None, col=None, t=None):
        self.condition = condition
        self.row = row
        self.col = col
        self.t = t
        super().__init__(message)


def _finite(value, what):
    v = float(value)
    if not math.isfinite(v):
        raise ProblemFormatError(f"{what} must be finite, got {value!r}")
    return v


@dataclass(frozen=True)
class TimePolynomial:
    """Polynomial c0 + c1 t + ... + cd t^d with ascending coefficients."""

    coeffs: tuple

    def __post_init__(self):
        try:
            coeffs = tuple(_finite(c, "polynomial coefficient") for c in self.coeffs)
        except TypeError as exc:
            raise ProblemFormatError(
                f"polynomial coefficients must be a sequence of numbers, got {self.coeffs!r}"
            ) from exc
        if not coeffs:
            coeffs = (0.0,)
        if len(coeffs) - 1 > MAX_POLY_DEGREE:
            raise ProblemFormatError(
                "polynomial degree %d exceeds the supported maximum %d"
                % (len(coeffs) - 1, MAX_POLY_DEGREE)
            )
        object.__setattr__(self, "coeffs", coeffs)

    def __call__(self, t):
        return float(npoly.polyval(t, self.coeffs))

    def sample(self, ts):
        """Evaluate on an array of times."""
        ts = np.asarray(ts, dtype=float)
        return np.broadcast_to(npoly.polyval(ts, self.coeffs), ts.shape).copy()

    @property
    def degree(self):
        return len(self.coeffs) - 1

    @property
    def is_constant(self):
        return all(c == 0.0 for c in self.coeffs[1:])


def _as_poly(p):
    if isinstance(p, TimePolynomial):
        return p
    if isinstance(p, (int, float)):
        return TimePolynomial((float(p),))
    return TimePolynomial(tuple(p))


@dataclass(frozen=True)
class PerturbationVector:
    """Strictly increasing perturbation parameters, each in (0, 1]."""

    eps: tuple

    def __post_init__(self):
        try:
            eps = tuple(float(e) for e in self.eps)
        except TypeError as exc:
            raise ProblemFormatError(
                f"perturbation parameters must be a sequence of numbers, got {self.eps!r}"
            ) from exc
        if not eps:
            raise ProblemFormatError("at least one perturbation parameter is required")
        object.__setattr__(self, "eps", eps)
        for i, e in enumerate(eps):
            if not math.isfinite(e) or not (0.0 < e <= 1.0):
                raise ProblemValidationError(
                    "eps-range",
                    f"perturbation parameter {i + 1} is {e!r}, expected a value in (0, 1]",
                )
        for i in range(len(eps) - 1):
            if eps[i] == eps[i + 1]:
                raise ProblemValidationError(
                    "eps-coincident",
                    "perturbation parameters %d and %d coincide (%r); scales must be distinct"
                    % (i + 1, i + 2, eps[i]),
                )
            if eps[i] > eps[i + 1]:
                raise ProblemValidationError(
                    "eps-ordering",
                    "perturbation parameters must increase strictly, got %r before %r"
                    % (eps[i], eps[i + 1]),
                )

    @property
    def n(self):
        return len(self.eps)

    def as_array(self):
        return np.asarray(self.eps, dtype=float)

    def __iter__(self):
        return iter(self.eps)

    def __getitem__(self, i):
        return self.eps[i]

    def __len__(self):
        return len(self.eps)


@dataclass(frozen=True)
class ProblemSpec:
    """Complete statement of one initial value problem."""

    n: int
    A: tuple
    f: tuple
    u0: tuple
    T: float
    eps: PerturbationVector

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise ProblemFormatError("system size n must be at least 1")
        A = tuple(tuple(_as_poly(p) for p in row) for row in self.A)
        f = tuple(_as_poly(p) for p in self.f)
        u0 = tuple(_finite(v, "initial value") for v in self.u0)
        eps = self.eps if isinstance(self.eps, PerturbationVector) else PerturbationVector(tuple(self.eps))
        T = _finite(self.T, "horizon T")
        if len(A) != n or any(len(row) != n for row in A):
            raise ProblemFormatError(f"coefficient matrix must be {n}x{n}")
        if len(f) != n:
            raise ProblemFormatError(f"forcing must have {n} components")
        if len(u0) != n:
            raise ProblemFormatError(f"initial value must have {n} components")
        if eps.n != n:
            raise ProblemFormatError(
                f"expected {n} perturbation parameters, got {eps.n}"
            )
        if T <= 0.0:
            raise ProblemFormatError("horizon T must be positive")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "u0", u0)
        object.__setattr__(self, "T", T)
        object.__setattr__(self, "eps", eps)

    def _check_time(self, t):
        t = float(t)
        if t < 0.0 or t > self.T:
            raise ValueError(f"time {t!r} outside the problem domain [0, {self.T!r}]")
        return t

    def eval_A(self, t):
        """Coefficient matrix at one time."""
        t = self._check_time(t)
        return np.array([[p(t) for p in row] for row in self.A])

    def eval_f(self, t):
        """Forcing vector at one time."""
        t = self._check_time(t)
        return np.array([p(t) for p in self.f])

    def has_constant_matrix(self):
        return all(p.is_constant for row in self.A for p in row)

    def has_constant_forcing(self):
        return all(p.is_constant for p in self.f)

    def has_constant_coefficients(self):
        return self.has_constant_matrix() and self.has_constant_forcing()

    def with_eps(self, eps):
        """Same problem at a different point of the parameter space."""
        return replace(self, eps=PerturbationVector(tuple(eps)))


@dataclass(frozen=True)
class ValidatedProblem:
    """A ProblemSpec that passed validation, with its extracted decay rate."""

    spec: ProblemSpec
    alpha: float
    sample_count: int


def _check_times(spec, ts):
    if ts.size and (float(ts.min()) < 0.0 or float(ts.max()) > spec.T):
        raise ValueError(
            f"times outside the problem domain [0, {spec.T!r}]"
        )


def sample_A(spec, ts):
    """Coefficient matrix on an array of times; shape (len(ts), n, n)."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    _check_times(spec, ts)
    out = np.empty((ts.size, spec.n, spec.n))
    for i, row in enumerate(spec.A):
        for j, p in enumerate(row):
            out[:, i, j] = p.sample(ts)
    return out


def sample_f(spec, ts):
    """Forcing on an array of times; shape (len(ts), n)."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    _check_times(spec, ts)
    out = np.empty((ts.size, spec.n))
    for i, p in enumerate(spec.f):
        out[:, i] = p.sample(ts)
    return out


def validate(spec, sample_count=DEFAULT_SAMPLE_COUNT):
    """Admissibility check by dense sampling over [0, T].

    Verifies nonpositive off-diagonal entries and strict row dominance of
    A(t) on a uniform sample grid including both endpoints, extracts alpha
    as the sampled minimum row sum, and checks that the horizon covers the
    slowest layer (T >= 2 max(eps) / alpha). Sampling rather than symbolic
    positivity is deliberate; violations hiding between samples are the
    caller's responsibility, and alpha is the sampled minimum rather than an
    infimum over the whole interval.
    """
    sample_count = int(sample_count)
    if sample_count < 2:
        raise ValueError("sample_count must be at least 2")
    ts = np.linspace(0.0, spec.T, sample_count)
    a = sample_A(spec, ts)
    idx = np.arange(spec.n)
    off = a.copy()
    off[:, idx, idx] = 0.0
    bad = np.argwhere(off > 0.0)
    if bad.size:
        s, i, j = (int(v) for v in bad[0])
        raise ProblemValidationError(
            "off-diagonal-sign",
            "entry (%d,%d) of the coefficient matrix is positive (%.6g) at t=%.6g"
            % (i + 1, j + 1, off[s, i, j], ts[s]),
            row=i + 1,
            col=j + 1,
            t=float(ts[s]),
        )
    diag = a[:, idx, idx]
    offsum = np.abs(off).sum(axis=2)
    bad = np.argwhere(diag <= offsum)
    if bad.size:
        s, i = (int(v) for v in bad[0])
        raise ProblemValidationError(
            "row-dominance",
            "row %d of the coefficient matrix is not strictly diagonally dominant "
            "at t=%.6g (diagonal %.6g vs off-diagonal sum %.6g)"
            % (i + 1, ts[s], diag[s, i], offsum[s, i]),
            row=i + 1,
            t=float(ts[s]),
        )
    alpha = float(a.sum(axis=2).min())
    if alpha <= 0.0:
        raise ProblemValidationError(
            "alpha-positive",
            "sampled minimum row sum of the coefficient matrix is %.6g, expected > 0" % alpha,
        )
    needed = 2.0 * spec.eps[-1] / alpha
    if spec.T < needed:
        raise ProblemValidationError(
            "horizon",
            "horizon T=%.6g is shorter than 2*max(eps)/alpha=%.6g; the slowest layer does not fit"
            % (spec.T, needed),
        )
    return ValidatedProblem(spec=spec, alpha=alpha, sample_count=sample_count)


_PROBLEM_KEYS = ("n", "T", "eps", "u0", "A", "f")


def problem_from_dict(data):
    """Build a ProblemSpec from the documented JSON layout.

    Unknown keys are rejected by name; silently ignoring them hides typos in
    problem files.
    """
    if not isinstance(data, dict):
        raise ProblemFormatError("problem document must be a JSON object")
    unknown = sorted(set(data) - set(_PROBLEM_KEYS))
    if unknown:
        raise ProblemFormatError("unknown problem key(s): %s" % ", ".join(unknown))
    missing = [k for k in _PROBLEM_KEYS if k not in data]
    if missing:
        raise ProblemFormatError("missing problem key(s): %s" % ", ".join(missing))
    try:
        n = int(data["n"])
    except (TypeError, ValueError) as exc:
        raise ProblemFormatError(f"key 'n' must be an integer, got {data['n']!r}") from exc
    try:
        return ProblemSpec(
            n=n,
            A=tuple(tuple(_as_poly(entry) for entry in row) for row in data["A"]),
            f=tuple(_as_poly(entry) for entry in data["f"]),
            u0=tuple(data["u0"]),
            T=data["T"],
            eps=PerturbationVector(tuple(data["eps"])),
        )
    except TypeError as exc:
        raise ProblemFormatError(f"malformed problem data: {exc}") from exc


def problem_to_dict(spec):
    """Inverse of problem_from_dict, for round trips and report metadata."""
    return {
        "n": spec.n,
        "T": spec.T,
        "eps": list(spec.eps),
        "u0": list(spec.u0),
        "A": [[list(p.coeffs) for p in row] for row in spec.A],
        "f": [list(p.coeffs) for p in spec.f],
    }


def load_problem(path):
    """Read a problem file (JSON)."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ProblemFormatError(f"{path}: not valid JSON: {exc}") from exc
    return problem_from_dict(data)
