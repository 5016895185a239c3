"""Joint prior covariance for the node field ``gamma`` and the network field ``theta``.

Both fields share the covariance ``sigma * O`` and are cross-correlated through
``rho * (sigma / delta) * I``.  Working in the eigenbasis ``O = U' diag(d) U``
turns every precision computation into a diagonal operation.
"""

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, InputError, NumericalError

KERNEL_KINDS = ("squared-exponential", "marginal-identity", "hemisphere-symmetric")
EIGEN_FLOOR = 1e-10


@dataclass(frozen=True)
class KernelSpec:
    kind: str = "squared-exponential"
    pair_correlation: float = 0.2
    pairs: tuple = ()
    coord_scale: float = 1.0

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ConfigurationError(f"unknown kernel kind {self.kind!r}; "
                                     f"expected one of {KERNEL_KINDS}")
        if not 0.0 <= self.pair_correlation < 1.0:
            raise ConfigurationError("pair_correlation must lie in [0, 1)")
        if not (self.coord_scale > 0 and math.isfinite(self.coord_scale)):
            raise ConfigurationError("coord_scale must be positive")
        pairs = tuple(tuple(int(i) for i in pr) for pr in self.pairs)
        object.__setattr__(self, "pairs", pairs)
        if self.kind == "hemisphere-symmetric":
            if not pairs:
                raise ConfigurationError("hemisphere-symmetric kernel needs a pair list")
            seen = [i for pr in pairs for i in pr]
            if any(len(pr) != 2 or pr[0] == pr[1] for pr in pairs) or len(seen) != len(set(seen)):
                raise ConfigurationError("each node may appear in at most one symmetric pair")


def build_kernel(coords, spec=None, n_nodes=None):
    """Kernel matrix ``O`` for the chosen ``spec``.

    ``coords`` may be ``None`` for the kernels that do not use locations, in
    which case ``n_nodes`` gives the size.
    """
    spec = spec or KernelSpec()
    if coords is not None:
        coords = np.asarray(coords, dtype=float)
        if not np.all(np.isfinite(coords)):
            raise InputError("coords: non-finite coordinate")
        p = coords.shape[0]
    elif n_nodes is not None:
        p = int(n_nodes)
    else:
        raise ConfigurationError("build_kernel needs coords or n_nodes")

    if spec.kind == "squared-exponential":
        if coords is None:
            raise ConfigurationError("squared-exponential kernel requires node coordinates")
        s = coords / spec.coord_scale
        sq = np.sum(s * s, axis=1)
        dist2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * s @ s.T, 0.0)
        # Symmetrize exactly so the result equals its transpose bit-for-bit.
        dist2 = np.triu(dist2, 1)
        dist2 = dist2 + dist2.T
        return np.exp(-dist2 / 2.0)
    if spec.kind == "marginal-identity":
        return np.eye(p)
    O = np.eye(p)
    for i, j in spec.pairs:
        if not (0 <= i < p and 0 <= j < p):
            raise ConfigurationError(f"symmetric pair ({i}, {j}) outside 0..{p - 1}")
        O[i, j] = O[j, i] = spec.pair_correlation
    return O


def eigendecompose(O):
    """Return ``(U, d)`` with ``O = U.T @ diag(d) @ U`` and ``d`` descending.

    Eigenvalues below ``EIGEN_FLOOR * d_max`` are raised to that floor.
    """
    O = np.asarray(O, dtype=float)
    try:
        w, V = np.linalg.eigh(O)
    except np.linalg.LinAlgError as exc:
        cond = np.linalg.cond(O)
        raise NumericalError(f"eigendecomposition failed (condition number {cond:.3g})") from exc
    order = np.argsort(w)[::-1]
    d = w[order]
    U = V[:, order].T
    floor = EIGEN_FLOOR * max(d[0], 0.0)
    if d[-1] < floor or d[0] <= 0:
        if d[0] <= 0:
            raise NumericalError("kernel matrix has no positive eigenvalue")
        warnings.warn(f"kernel eigenvalues below {floor:.3g} clamped (near-singular kernel)",
                      stacklevel=2)
        d = np.maximum(d, floor)
    return np.ascontiguousarray(U), d


def check_pd_constraint(rho, delta, d_min):
    """Positive-definiteness condition ``|rho| / delta <= d_min`` of the joint prior."""
    return abs(rho) / delta <= d_min


def default_delta(d_min):
    """Smallest safe divisor, never below 10, keeping the constraint over ``|rho| < 1``."""
    return float(max(10.0, math.ceil(1.0 / d_min)))


def joint_covariance(O, rho, delta, sigma=1.0):
    """The 2P x 2P prior covariance of ``(gamma, theta)``."""
    p = O.shape[0]
    c = rho * sigma / delta * np.eye(p)
    return np.block([[sigma * O, c], [c, sigma * O]])


@dataclass(frozen=True)
class PriorStructure:
    """Kernel, its eigendecomposition and the fixed correlation divisor."""

    O: np.ndarray
    U: np.ndarray
    d: np.ndarray
    delta: float
    spec: KernelSpec = field(default_factory=KernelSpec)

    @classmethod
    def build(cls, coords=None, spec=None, n_nodes=None, delta=None):
        spec = spec or KernelSpec()
        O = build_kernel(coords, spec, n_nodes=n_nodes)
        U, d = eigendecompose(O)
        if delta is None:
            delta = default_delta(d[-1])
        elif not delta > 0:
            raise ConfigurationError("delta must be positive")
        return cls(O=O, U=U, d=d, delta=float(delta), spec=spec)

    @property
    def n_nodes(self):
        return self.d.shape[0]

    @property
    def d_min(self):
        return float(self.d[-1])

    def feasible(self, rho):
        return abs(rho) < 1.0 and check_pd_constraint(rho, self.delta, self.d_min)

    def precision_blocks(self, rho):
        """``(K1, K2)`` with ``K1 = U' D Delta U`` and ``K2 = U' Delta U``.

        The joint prior precision is ``(1/sigma) [[K1, -c K2], [-c K2, K1]]``
        with ``c = rho / delta``.
        """
        c = rho / self.delta
        inv = 1.0 / (self.d ** 2 - c * c)
        K1 = (self.U.T * (self.d * inv)) @ self.U
        K2 = (self.U.T * inv) @ self.U
        return K1, K2

    def quadratic_form(self, gamma, theta, rho):
        """``sigma`` times the joint-prior quadratic form of ``(gamma, theta)``."""
        c = rho / self.delta
        g = self.U @ gamma
        t = self.U @ theta
        den = self.d ** 2 - c * c
        return float(np.sum((self.d * (g * g + t * t) - 2.0 * c * g * t) / den))

    def log_det_factor(self, rho):
        """``sum_p log(d_p^2 - rho^2/delta^2)``."""
        c = rho / self.delta
        return float(np.sum(np.log(self.d ** 2 - c * c)))
