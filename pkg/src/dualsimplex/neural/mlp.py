"""Dense feed-forward networks over a flat parameter vector.

Layout per layer: the (n_out, n_in) weight matrix in row-major order, then
the n_out biases.  A layer computes act(W @ x + b).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .._jit import njit

ACTIVATIONS = ("identity", "tanh", "relu")


@dataclass(frozen=True)
class MlpSpec:
    layer_sizes: tuple
    activations: tuple

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        acts = tuple(str(a) for a in self.activations)
        if len(sizes) < 2:
            raise ValueError("need at least input and output layers")
        if min(sizes) < 1:
            raise ValueError("layer sizes must be >= 1")
        if len(acts) != len(sizes) - 1:
            raise ValueError("one activation per non-input layer")
        for a in acts:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}")
        object.__setattr__(self, "layer_sizes", sizes)
        object.__setattr__(self, "activations", acts)

    @property
    def n_in(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_out(self) -> int:
        return self.layer_sizes[-1]

    def sizes_array(self) -> np.ndarray:
        return np.array(self.layer_sizes, dtype=np.int64)

    def act_codes(self) -> np.ndarray:
        return np.array([ACTIVATIONS.index(a) for a in self.activations], dtype=np.int64)

    def describe(self) -> str:
        return "-".join(map(str, self.layer_sizes)) + ":" + ",".join(self.activations)

    @classmethod
    def parse(cls, text: str) -> "MlpSpec":
        sizes, _, acts = text.partition(":")
        return cls(tuple(int(s) for s in sizes.split("-")), tuple(acts.split(",")))


PENDULUM_SPEC = MlpSpec((4, 128, 1), ("tanh", "tanh"))
ROVER_SPEC = MlpSpec((3, 100, 100, 2), ("relu", "relu", "tanh"))


def param_count(spec: MlpSpec) -> int:
    s = spec.layer_sizes
    return sum(s[i] * s[i + 1] + s[i + 1] for i in range(len(s) - 1))


def unpack(spec: MlpSpec, w):
    """List of (W, b) views into ``w``."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or w.size != param_count(spec):
        raise ValueError(f"weight vector length {w.size} != param_count {param_count(spec)}")
    out = []
    k = 0
    s = spec.layer_sizes
    for i in range(len(s) - 1):
        n_in, n_out = s[i], s[i + 1]
        W = w[k:k + n_in * n_out].reshape(n_out, n_in)
        k += n_in * n_out
        out.append((W, w[k:k + n_out]))
        k += n_out
    return out


@njit
def forward_flat(w, sizes, acts, x):
    """Forward pass on the flat layout (compiled when numba is enabled)."""
    h = x.copy()
    k = 0
    for i in range(sizes.shape[0] - 1):
        n_in = sizes[i]
        n_out = sizes[i + 1]
        W = w[k:k + n_in * n_out].reshape((n_out, n_in))
        k += n_in * n_out
        z = np.dot(W, h) + w[k:k + n_out]
        k += n_out
        a = acts[i]
        if a == 1:
            z = np.tanh(z)
        elif a == 2:
            z = np.maximum(z, 0.0)
        h = z
    return h


def mlp_forward(spec: MlpSpec, w, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n_in,):
        raise ValueError(f"input length {x.size} != {spec.n_in}")
    w = np.ascontiguousarray(w, dtype=float)
    if w.ndim != 1 or w.size != param_count(spec):
        raise ValueError(f"weight vector length {w.size} != param_count {param_count(spec)}")
    return forward_flat(w, spec.sizes_array(), spec.act_codes(), np.ascontiguousarray(x))


class Policy:
    """Callable network with cached layout arrays."""

    def __init__(self, spec: MlpSpec, w):
        w = np.ascontiguousarray(w, dtype=float)
        if w.ndim != 1 or w.size != param_count(spec):
            raise ValueError(f"weight vector length {w.size} != param_count {param_count(spec)}")
        self.spec = spec
        self.w = w
        self._sizes = spec.sizes_array()
        self._acts = spec.act_codes()

    def __call__(self, x) -> np.ndarray:
        return forward_flat(self.w, self._sizes, self._acts, np.ascontiguousarray(x, dtype=float))
