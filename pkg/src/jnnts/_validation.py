"""Input validation helpers shared by the estimator, the loaders and the sampler."""

import warnings

import numpy as np

from .exceptions import ConfigurationError, InputError

SYMMETRY_TOL = 1e-8


def _as_float_array(a, name, ndim):
    try:
        arr = np.asarray(a, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name}: cannot convert to a float array ({exc})") from exc
    if arr.ndim != ndim:
        raise InputError(f"{name}: expected {ndim}-d array, got shape {arr.shape}")
    return arr


def check_finite(arr, name):
    """Raise InputError naming the first non-finite entry of ``arr``."""
    bad = ~np.isfinite(arr)
    if bad.any():
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        if arr.ndim == 1:
            where = f"row {idx[0]}"
        elif arr.ndim == 2:
            where = f"row {idx[0]}, column {idx[1]}"
        else:
            where = f"index {idx}"
        raise InputError(f"{name}: non-finite value at {where}")
    return arr


def check_outcome(y):
    y = check_finite(_as_float_array(y, "y", 1), "y")
    if y.shape[0] < 1:
        raise InputError("y: need at least one subject")
    return y


def check_node_features(X, n):
    X = check_finite(_as_float_array(X, "X", 2), "X")
    if X.shape[0] != n:
        raise InputError(f"X: has {X.shape[0]} rows, expected {n}")
    if X.shape[1] < 2:
        raise InputError("X: need at least two nodes")
    return X


def check_covariates(W, n):
    """Return W with a leading column of ones, prepending one if absent."""
    if W is None:
        return np.ones((n, 1))
    W = check_finite(_as_float_array(W, "W", 2), "W")
    if W.shape[0] != n:
        raise InputError(f"W: has {W.shape[0]} rows, expected {n}")
    if W.shape[1] == 0 or not np.all(W[:, 0] == 1.0):
        warnings.warn("W: first column is not all ones; prepending an intercept column",
                      stacklevel=3)
        W = np.column_stack([np.ones(n), W])
    return W


def check_connectivity(Z, n, p):
    """Validate an (n, p, p) stack of connectivity matrices.

    Off-diagonal asymmetry beyond SYMMETRY_TOL is an error; a non-zero diagonal
    is zeroed with a warning.
    """
    Z = check_finite(_as_float_array(Z, "Z", 3), "Z")
    if Z.shape != (n, p, p):
        raise InputError(f"Z: expected shape {(n, p, p)}, got {Z.shape}")
    asym = np.abs(Z - Z.transpose(0, 2, 1))
    if asym.max(initial=0.0) > SYMMETRY_TOL:
        i, k, l = np.unravel_index(np.argmax(asym), asym.shape)
        raise InputError(f"Z: subject {i} is not symmetric at ({k}, {l})")
    Z = 0.5 * (Z + Z.transpose(0, 2, 1))
    diag = np.einsum("ikk->ik", Z)
    if np.any(diag != 0.0):
        warnings.warn("Z: non-zero diagonal entries set to zero", stacklevel=3)
        Z = Z.copy()
        idx = np.arange(p)
        Z[:, idx, idx] = 0.0
    return np.ascontiguousarray(Z)


def check_coords(coords, p):
    if coords is None:
        return None
    coords = _as_float_array(coords, "coords", 2)
    if coords.shape != (p, 3):
        raise InputError(f"coords: expected shape {(p, 3)}, got {coords.shape}")
    return check_finite(coords, "coords")


def check_positive(value, name):
    if not (np.isfinite(value) and value > 0):
        raise ConfigurationError(f"{name} must be a finite positive number, got {value!r}")
    return float(value)


def check_probability_open(value, name):
    if not (0.0 < value < 1.0):
        raise ConfigurationError(f"{name} must lie in (0, 1), got {value!r}")
    return float(value)
