"""Utility specifications, parameter vectors, and the correlation factor.

Two utility families are supported.  Linear specs map named coefficient
slots onto attribute references (alternative-specific constants, generic or
alternative-specific coefficients).  Nonlinear specs give each alternative
its own small rectifier network over that alternative's attributes plus the
full shared-attribute block.  Correlation between stochastic terms is
carried by a lower-triangular factor with unit-norm rows, built from
unconstrained parameters so the optimizer never leaves the valid region.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import STREAM_INIT, philox_stream
from .errors import ConfigError, ParameterizationError, SchemaError, ShapeError


@dataclass(frozen=True)
class ParameterSet:
    """Flat ordered vector of free parameters with named slots."""

    names: tuple
    values: np.ndarray

    def __post_init__(self):
        names = tuple(self.names)
        vals = np.array(self.values, dtype=np.float64)
        vals.setflags(write=False)
        if vals.ndim != 1 or len(names) != vals.shape[0]:
            raise ShapeError(f"{len(names)} names for {vals.shape} values")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise ConfigError(f"duplicate parameter slot names: {dupes}")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __len__(self):
        return len(self.names)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise SchemaError(f"no parameter slot named {name!r}") from None

    def get(self, name: str) -> float:
        return float(self.values[self.index(name)])

    def with_values(self, values) -> "ParameterSet":
        return ParameterSet(self.names, values)

    def as_dict(self) -> dict:
        return {n: float(v) for n, v in zip(self.names, self.values)}

    def to_json_dict(self) -> dict:
        return {"names": list(self.names), "values": [float(v) for v in self.values]}

    @classmethod
    def from_json_dict(cls, blob) -> "ParameterSet":
        return cls(tuple(blob["names"]), np.asarray(blob["values"], dtype=np.float64))


# ---------------------------------------------------------------------------
# Linear utilities
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LinearTerm:
    """One utility contribution: slot `param` times `variable` (1 if None).

    `alternatives` lists the alternative indices the term enters.  A term
    spanning several alternatives with an alternative-indexed variable is a
    generic (shared) coefficient.
    """

    param: str
    variable: str | None
    alternatives: tuple

    def __post_init__(self):
        object.__setattr__(self, "alternatives", tuple(int(a) for a in self.alternatives))


@dataclass(frozen=True)
class LinearUtilitySpec:
    j: int
    terms: tuple
    base_alternative: int

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not 0 <= self.base_alternative < self.j:
            raise ConfigError(f"base alternative {self.base_alternative} outside [0, {self.j})")
        for t in self.terms:
            for a in t.alternatives:
                if not 0 <= a < self.j:
                    raise ConfigError(f"term {t.param!r} references alternative {a} outside [0, {self.j})")
            if t.variable is None and self.base_alternative in t.alternatives:
                raise ConfigError(
                    f"constant slot {t.param!r} covers the base alternative "
                    f"{self.base_alternative}; the base constant is fixed to 0")

    @property
    def param_names(self) -> tuple:
        seen = []
        for t in self.terms:
            if t.param not in seen:
                seen.append(t.param)
        return tuple(seen)


def _obs_value(obs, variable, alt, j):
    if variable is None:
        return 1.0
    try:
        val = obs[variable]
    except (KeyError, TypeError):
        raise SchemaError(f"observation does not provide variable {variable!r}") from None
    arr = np.asarray(val, dtype=np.float64)
    if arr.ndim == 0:
        return float(arr)
    if arr.shape[0] != j:
        raise ShapeError(f"variable {variable!r} has {arr.shape[0]} entries for {j} alternatives")
    return float(arr[alt])


def linear_utilities(spec: LinearUtilitySpec, params: ParameterSet, obs) -> np.ndarray:
    """Deterministic utilities of one choice situation under a linear spec.

    `obs` maps variable names to either a length-J array (alternative
    attribute) or a scalar (shared attribute).
    """
    v = np.zeros(spec.j)
    for t in spec.terms:
        beta = params.get(t.param)
        for a in t.alternatives:
            v[a] += beta * _obs_value(obs, t.variable, a, spec.j)
    return v


class LinearDesign:
    """Linear spec bound to a dataset: batch utilities and their backprop.

    `data` must expose n, j, alt_column(var, alt) and shared_column(var);
    see rumsim.dataio.Dataset.
    """

    def __init__(self, spec: LinearUtilitySpec, data, param_names=None):
        self.spec = spec
        self.n = data.n
        if data.j != spec.j:
            raise SchemaError(f"spec has {spec.j} alternatives, dataset has {data.j}")
        names = tuple(param_names) if param_names is not None else spec.param_names
        index = {n: i for i, n in enumerate(names)}
        self.param_names = names
        self._bindings = []  # (param index, alternative, column)
        ones = np.ones(self.n)
        for t in spec.terms:
            pidx = index[t.param]
            for a in t.alternatives:
                if t.variable is None:
                    col = ones
                elif data.has_alt_var(t.variable):
                    col = data.alt_column(t.variable, a)
                elif data.has_shared_var(t.variable):
                    col = data.shared_column(t.variable)
                else:
                    raise SchemaError(f"variable {t.variable!r} not found in dataset columns")
                self._bindings.append((pidx, a, np.ascontiguousarray(col, dtype=np.float64)))

    @property
    def n_params(self) -> int:
        return len(self.param_names)

    def utilities(self, theta: np.ndarray):
        v = np.zeros((self.n, self.spec.j))
        for pidx, alt, col in self._bindings:
            v[:, alt] += theta[pidx] * col
        return v, None

    def backprop(self, dv: np.ndarray, cache=None) -> np.ndarray:
        g = np.zeros(self.n_params)
        for pidx, alt, col in self._bindings:
            g[pidx] += float(dv[:, alt] @ col)
        return g

    def init_values(self, seed: int) -> np.ndarray:
        return np.zeros(self.n_params)


# ---------------------------------------------------------------------------
# Nonlinear utilities (per-alternative rectifier subnetworks)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NonlinearUtilitySpec:
    j: int
    alt_vars: tuple
    shared_vars: tuple = ()
    hidden: tuple = (100, 100)

    def __post_init__(self):
        object.__setattr__(self, "alt_vars", tuple(self.alt_vars))
        object.__setattr__(self, "shared_vars", tuple(self.shared_vars))
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.j < 2:
            raise ConfigError("need at least two alternatives")
        if not self.alt_vars and not self.shared_vars:
            raise ConfigError("nonlinear spec needs at least one input variable")
        if any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden widths must be positive, got {self.hidden}")

    @property
    def input_dim(self) -> int:
        return len(self.alt_vars) + len(self.shared_vars)

    def layer_dims(self):
        """[(fan_in, fan_out), ...] for each affine layer, final output 1."""
        widths = [self.input_dim, *self.hidden, 1]
        return list(zip(widths[:-1], widths[1:]))

    @property
    def param_names(self) -> tuple:
        names = []
        for alt in range(self.j):
            for lidx, (fin, fout) in enumerate(self.layer_dims()):
                names.extend(f"net{alt}/l{lidx}/w{r}_{c}" for r in range(fin) for c in range(fout))
                names.extend(f"net{alt}/l{lidx}/b{c}" for c in range(fout))
        return tuple(names)


def _subnet_slices(spec: NonlinearUtilitySpec):
    """Flat-vector slices for each alternative's (W, b) pairs."""
    out, pos = [], 0
    for _ in range(spec.j):
        layers = []
        for fin, fout in spec.layer_dims():
            w = slice(pos, pos + fin * fout)
            pos += fin * fout
            b = slice(pos, pos + fout)
            pos += fout
            layers.append((w, b, fin, fout))
        out.append(layers)
    return out, pos


def nonlinear_param_count(spec: NonlinearUtilitySpec) -> int:
    return _subnet_slices(spec)[1]


def _forward_net(x, theta, layers):
    """Rectifier net forward pass; returns (n, out) and per-layer activations.

    Hidden layers apply the rectifier; the final layer stays affine.
    """
    acts = [x]
    h = x
    last = len(layers) - 1
    for lidx, (ws, bs, fin, fout) in enumerate(layers):
        w = theta[ws].reshape(fin, fout)
        b = theta[bs]
        h = h @ w + b
        if lidx != last:
            np.maximum(h, 0.0, out=h)
        acts.append(h)
    return h, acts


def _backward_net(delta, theta, layers, acts, grad):
    """Accumulate gradient of sum(delta * output) into the flat grad vector."""
    last = len(layers) - 1
    for lidx in range(last, -1, -1):
        ws, bs, fin, fout = layers[lidx]
        w = theta[ws].reshape(fin, fout)
        h_in = acts[lidx]
        grad[ws] += (h_in.T @ delta).reshape(-1)
        grad[bs] += delta.sum(axis=0)
        if lidx > 0:
            delta = delta @ w.T
            delta = delta * (acts[lidx] > 0.0)


class NonlinearDesign:
    """Nonlinear spec bound to a dataset (columns already standardized)."""

    def __init__(self, spec: NonlinearUtilitySpec, data):
        self.spec = spec
        self.n = data.n
        if data.j != spec.j:
            raise SchemaError(f"spec has {spec.j} alternatives, dataset has {data.j}")
        self._layers, self._count = _subnet_slices(spec)
        shared = [np.ascontiguousarray(data.shared_column(v), dtype=np.float64)
                  for v in spec.shared_vars]
        self._inputs = []
        for alt in range(spec.j):
            cols = [np.ascontiguousarray(data.alt_column(v, alt), dtype=np.float64)
                    for v in spec.alt_vars]
            self._inputs.append(np.column_stack(cols + shared) if cols + shared
                                else np.zeros((self.n, 0)))

    @property
    def n_params(self) -> int:
        return self._count

    @property
    def param_names(self) -> tuple:
        return self.spec.param_names

    def utilities(self, theta: np.ndarray):
        v = np.empty((self.n, self.spec.j))
        caches = []
        for alt in range(self.spec.j):
            out, acts = _forward_net(self._inputs[alt], theta, self._layers[alt])
            v[:, alt] = out[:, 0]
            caches.append(acts)
        return v, (theta, caches)

    def backprop(self, dv: np.ndarray, cache) -> np.ndarray:
        theta, caches = cache
        grad = np.zeros(self._count)
        for alt in range(self.spec.j):
            _backward_net(dv[:, alt][:, None], theta, self._layers[alt], caches[alt], grad)
        return grad

    def init_values(self, seed: int) -> np.ndarray:
        gen = philox_stream(seed, STREAM_INIT)
        theta = np.zeros(self._count)
        for layers in self._layers:
            for ws, bs, fin, fout in layers:
                std = math.sqrt(2.0 / max(fin, 1))
                theta[ws] = std * gen.standard_normal(fin * fout)
        return theta


def nonlinear_utilities(spec: NonlinearUtilitySpec, params: ParameterSet, obs) -> np.ndarray:
    """Deterministic utilities of one choice situation under a nonlinear spec."""
    layers, count = _subnet_slices(spec)
    if len(params) != count:
        raise ShapeError(f"spec needs {count} parameters, got {len(params)}")
    theta = params.values
    v = np.empty(spec.j)
    for alt in range(spec.j):
        x = [_obs_value(obs, var, alt, spec.j) for var in spec.alt_vars]
        x += [_obs_value(obs, var, 0, spec.j) for var in spec.shared_vars]
        row = np.asarray(x, dtype=np.float64)[None, :]
        out, _ = _forward_net(row, theta, layers[alt])
        v[alt] = out[0, 0]
    return v


def normalize_to_base(u, base: int) -> np.ndarray:
    """Subtract the base alternative's utility from every entry."""
    arr = np.asarray(u, dtype=np.float64)
    if not 0 <= base < arr.shape[-1]:
        raise ConfigError(f"base index {base} outside [0, {arr.shape[-1]})")
    return arr - arr[..., base:base + 1]


# ---------------------------------------------------------------------------
# Correlation factor with unit-norm rows
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CholeskySpec:
    """Unit-diagonal covariance factor for the differenced error terms.

    The factor L is (J-1) x (J-1) lower triangular with unit-norm rows, so
    L L' has a unit diagonal.  Rows are built from unconstrained parameters:
    each raw value passes through tanh, entries fill left to right scaled by
    the remaining norm budget, and the diagonal takes the positive
    remainder.  For J = 3 this reduces to [[1, 0], [a, sqrt(1 - a^2)]] with
    a = tanh(raw).
    """

    j: int

    def __post_init__(self):
        if self.j < 2:
            raise ConfigError("correlation requires at least two alternatives")

    @property
    def size(self) -> int:
        return self.j - 1

    @property
    def n_free(self) -> int:
        m = self.size
        return m * (m - 1) // 2

    @property
    def param_names(self) -> tuple:
        return tuple(f"chol_{r}_{c}" for r in range(1, self.size) for c in range(r))


_DEGENERACY_FLOOR = 1e-12


def build_cholesky(spec: CholeskySpec, params) -> np.ndarray:
    """Lower-triangular factor with unit-norm rows from raw parameters.

    `params` is a ParameterSet holding the spec's slots, or a flat array of
    raw values in row-major strict-lower order.
    """
    if isinstance(params, ParameterSet):
        raw = np.array([params.get(n) for n in spec.param_names])
    else:
        raw = np.asarray(params, dtype=np.float64)
    if raw.shape != (spec.n_free,):
        raise ShapeError(f"expected {spec.n_free} raw values, got shape {raw.shape}")
    m = spec.size
    low = np.zeros((m, m))
    low[0, 0] = 1.0
    k = 0
    for r in range(1, m):
        rem = 1.0
        for c in range(r):
            t = math.tanh(raw[k])
            k += 1
            low[r, c] = t * math.sqrt(rem)
            rem *= 1.0 - t * t
        if rem < _DEGENERACY_FLOOR:
            raise ParameterizationError(
                f"row {r} off-diagonals exhaust the unit norm budget (remainder {rem:.3e})")
        low[r, r] = math.sqrt(rem)
    return low


def cholesky_grad(spec: CholeskySpec, raw, d_low: np.ndarray) -> np.ndarray:
    """Chain d(loss)/dL back to the raw unconstrained parameters."""
    raw = np.asarray(raw, dtype=np.float64)
    m = spec.size
    low = build_cholesky(spec, raw)
    grad = np.zeros(spec.n_free)
    k = 0
    for r in range(1, m):
        t_row = np.tanh(raw[k:k + r])
        rem = np.empty(r)
        rem[0] = 1.0
        for c in range(1, r):
            rem[c] = rem[c - 1] * (1.0 - t_row[c - 1] ** 2)
        for e in range(r):
            tail = sum(d_low[r, c] * low[r, c] for c in range(e + 1, r)) \
                + d_low[r, r] * low[r, r]
            grad[k + e] = (1.0 - t_row[e] ** 2) * d_low[r, e] * math.sqrt(rem[e]) \
                - t_row[e] * tail
        k += r
    return grad


def correlation_entries(low: np.ndarray, base: int, j: int) -> dict:
    """Off-diagonal entries of L L' keyed by the alternative pairs they link.

    Non-base alternatives map onto factor rows in ascending index order;
    keys use 1-based alternative numbers, e.g. 'corr_1_2'.
    """
    psi = low @ low.T
    alts = [a for a in range(j) if a != base]
    out = {}
    for i1 in range(len(alts)):
        for i2 in range(i1 + 1, len(alts)):
            out[f"corr_{alts[i1] + 1}_{alts[i2] + 1}"] = float(psi[i1, i2])
    return out


def init_params(utility_design, chol_spec: CholeskySpec | None, seed: int) -> ParameterSet:
    """Initial ParameterSet for a bound design plus optional correlation block."""
    names = list(utility_design.param_names)
    values = list(utility_design.init_values(seed))
    if chol_spec is not None:
        names.extend(chol_spec.param_names)
        values.extend([0.0] * chol_spec.n_free)
    return ParameterSet(tuple(names), np.asarray(values, dtype=np.float64))
