"""Piecewise-uniform meshes condensing points inside nested initial layers.

The mesh on [0, T] is a union of n+1 uniform pieces joined at transition
points. Transitions are placed from the slowest scale downward: each either
halves its successor or stops at the layer width (eps_i / alpha) ln N,
whichever is smaller. The construction therefore produces one of 2^n shapes,
recorded as one branch bit per transition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .problem import PerturbationVector

__all__ = [
    "MeshError",
    "ShishkinMesh",
    "InteractionPoints",
    "transition_points",
    "interval_counts",
    "piecewise_uniform_mesh",
    "build_mesh",
    "bisect_mesh",
    "interaction_points",
]

# One-sided slack for geometry checks; covers linspace rounding only.
_GEOMETRY_SLACK = 1.0 + 1e-12


class MeshError(ValueError):
    """Mesh construction failed (unusable N, broken geometry)."""


@dataclass(frozen=True, eq=False)
class ShishkinMesh:
    """Mesh for one run; compared by identity and never mutated.

    points[j] is t_j with t_0 = 0 and t_N = T; deltas[j-1] = t_j - t_{j-1}.
    sigmas are the transition points in increasing order and b the branch
    bits (0 means the transition halved its successor, 1 means it sits at
    the layer width).
    """

    N: int
    points: np.ndarray
    deltas: np.ndarray
    sigmas: tuple
    b: tuple

    @property
    def n(self):
        return len(self.sigmas)

    @property
    def T(self):
        return float(self.points[-1])


def _as_eps(eps):
    return eps if isinstance(eps, PerturbationVector) else PerturbationVector(tuple(eps))


def _require_valid_N(N, n):
    N = int(N)
    block = 2 ** n
    if N < 2 or N % block != 0:
        raise MeshError(
            "N=%d is unusable with %d scale(s); choose N = %d*k with k a positive power of 2"
            % (N, n, block)
        )
    return N


def transition_points(eps, alpha, T, N):
    """Transition points and branch bits for the given run size.

    sigma_n = min(T/2, (eps_n/alpha) ln N), and going downward
    sigma_i = min(sigma_{i+1}/2, (eps_i/alpha) ln N). Bit b_i = 0 records the
    halving branch (ties count as halving), b_i = 1 the layer-width branch.
    """
    eps = _as_eps(eps)
    alpha = float(alpha)
    T = float(T)
    if alpha <= 0.0 or not math.isfinite(alpha):
        raise MeshError(f"alpha must be positive and finite, got {alpha!r}")
    if T <= 0.0 or not math.isfinite(T):
        raise MeshError(f"T must be positive and finite, got {T!r}")
    n = eps.n
    N = _require_valid_N(N, n)
    log_n = math.log(N)
    sigmas = [0.0] * n
    bits = [0] * n
    upper = T
    for i in range(n - 1, -1, -1):
        half = 0.5 * upper
        width = eps[i] / alpha * log_n
        if half <= width:
            sigmas[i] = half
            bits[i] = 0
        else:
            sigmas[i] = width
            bits[i] = 1
        upper = sigmas[i]
    return tuple(sigmas), tuple(bits)


def interval_counts(N, n):
    """Interval counts of the n+1 uniform pieces: N/2^n, N/2^(n-i+1), .., N/2."""
    counts = [N // 2 ** n]
    counts.extend(N // 2 ** (n - i + 1) for i in range(1, n))
    counts.append(N // 2)
    return tuple(counts)


def piecewise_uniform_mesh(eps, alpha, T, N):
    """Assemble the mesh: n+1 uniform pieces joined at the transition points."""
    eps = _as_eps(eps)
    T = float(T)
    alpha = float(alpha)
    sigmas, bits = transition_points(eps, alpha, T, N)
    N = int(N)
    n = eps.n
    counts = interval_counts(N, n)
    bounds = (0.0,) + sigmas + (T,)
    pieces = [
        np.linspace(bounds[k], bounds[k + 1], counts[k] + 1) for k in range(n + 1)
    ]
    points = np.concatenate([pieces[0]] + [piece[1:] for piece in pieces[1:]])
    deltas = np.diff(points)
    points.setflags(write=False)
    deltas.setflags(write=False)
    mesh = ShishkinMesh(N=N, points=points, deltas=deltas, sigmas=sigmas, b=bits)
    _verify_geometry(mesh, eps, alpha, T, counts)
    return mesh


def _verify_geometry(mesh, eps, alpha, T, counts):
    # Construction guarantees all of this; check anyway, a broken mesh would
    # silently poison every downstream error estimate.
    points = mesh.points
    if sum(counts) != mesh.N or points.shape != (mesh.N + 1,):
        raise MeshError("interval counts do not add up to N=%d" % mesh.N)
    if points[0] != 0.0 or points[-1] != T:
        raise MeshError("mesh endpoints are off")
    if not (mesh.deltas > 0.0).all():
        raise MeshError("mesh points are not strictly increasing")
    if float(mesh.deltas.max()) > 2.0 * T / mesh.N * _GEOMETRY_SLACK:
        raise MeshError("a mesh width exceeds 2T/N")
    log_n = math.log(mesh.N)
    previous = 0.0
    for i, s in enumerate(mesh.sigmas):
        if not s > previous:
            raise MeshError("transition points are not strictly increasing")
        if s > eps[i] / alpha * log_n * _GEOMETRY_SLACK:
            raise MeshError("transition point %d exceeds its layer width bound" % (i + 1))
        previous = s
    if mesh.sigmas[-1] > 0.5 * T * _GEOMETRY_SLACK:
        raise MeshError("last transition point exceeds T/2")


def build_mesh(vp, N):
    """Mesh for a validated problem, using its extracted alpha."""
    return piecewise_uniform_mesh(vp.spec.eps, vp.alpha, vp.spec.T, N)


def bisect_mesh(mesh):
    """Insert the midpoint of every interval, keeping the transition points.

    The refined mesh reuses the coarse sigmas instead of being rebuilt with
    ln(2N), so the two point sets nest exactly and two-grid differences need
    no interpolation.
    """
    old = mesh.points
    points = np.empty(2 * mesh.N + 1)
    points[::2] = old
    points[1::2] = 0.5 * (old[:-1] + old[1:])
    deltas = np.diff(points)
    points.setflags(write=False)
    deltas.setflags(write=False)
    return ShishkinMesh(
        N=2 * mesh.N, points=points, deltas=deltas, sigmas=mesh.sigmas, b=mesh.b
    )


@dataclass(frozen=True)
class InteractionPoints:
    """Crossing times of the scaled layer envelopes, keyed by 1-based (i, j)."""

    n: int
    values: dict

    def point(self, i, j):
        return self.values[(i, j)]


def interaction_points(eps, alpha):
    """Crossing time of the i-th and j-th scaled layer envelopes, i < j.

    The closed form is ln(eps_j/eps_i) / (alpha (1/eps_i - 1/eps_j)). The
    times increase in both indices; that ordering is checked here because
    analysis code relies on it.
    """
    eps = _as_eps(eps)
    alpha = float(alpha)
    if alpha <= 0.0 or not math.isfinite(alpha):
        raise MeshError(f"alpha must be positive and finite, got {alpha!r}")
    n = eps.n
    values = {}
    for i in range(n):
        for j in range(i + 1, n):
            t = math.log(eps[j] / eps[i]) / (alpha * (1.0 / eps[i] - 1.0 / eps[j]))
            values[(i + 1, j + 1)] = t
    for (i, j), t in values.items():
        if not t > 0.0:
            raise MeshError("crossing time (%d,%d) is not positive" % (i, j))
        later = values.get((i + 1, j))
        if later is not None and t > later:
            raise MeshError("crossing times out of order at (%d,%d)" % (i, j))
        later = values.get((i, j + 1))
        if later is not None and t > later:
            raise MeshError("crossing times out of order at (%d,%d)" % (i, j))
    return InteractionPoints(n=n, values=values)
