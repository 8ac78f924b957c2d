"""Residual Tanh network: affine lift, skip-connected Tanh blocks, affine
projection.

The forward map is

    v_0 = lift([x; t]),  v_{k+1} = v_k + Tanh(block_k(v_k)),  u = proj(v_N)

with every map affine.  All methods share this architecture; they differ
only in which loss terms train it.  Parameters serialize to a versioned
little-endian binary checkpoint that round-trips bit-exactly.
"""

import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"CLINNNET"
FORMAT_VERSION = 1


@dataclass
class Affine:
    W: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)


@dataclass
class Architecture:
    width: int
    depth: int
    input_dim: int

    def __post_init__(self):
        if self.width < 1 or self.depth < 0 or self.input_dim < 1:
            raise ValueError("architecture dimensions must be positive")


@dataclass
class Activation:
    """Activation kinds used across the workbench.

    Tanh drives the hidden blocks; HardTanh(c1, c2) appears only inside
    the boundedness penalty, never as a hidden activation.
    """

    kind: str
    c1: float = field(default=float("nan"))
    c2: float = field(default=float("nan"))

    def __post_init__(self):
        if self.kind not in ("tanh", "sigmoid", "hardtanh"):
            raise ValueError(f"unknown activation kind {self.kind!r}")
        if self.kind == "hardtanh" and not self.c1 < self.c2:
            raise ValueError("hardtanh needs c1 < c2")

    def apply(self, x):
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "tanh":
            return np.tanh(x)
        if self.kind == "sigmoid":
            return 1.0 / (1.0 + np.exp(-x))
        return np.clip(x, self.c1, self.c2)


@dataclass
class NetworkParams:
    lift: Affine
    blocks: list
    proj: Affine

    @property
    def width(self):
        return self.lift.W.shape[0]

    @property
    def depth(self):
        return len(self.blocks)

    @property
    def input_dim(self):
        return self.lift.W.shape[1]

    def architecture(self):
        return Architecture(self.width, self.depth, self.input_dim)


def _glorot(rng, fan_out, fan_in):
    a = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-a, a, size=(fan_out, fan_in))


def init(arch, seed):
    """Glorot-uniform weights, zero biases; deterministic per seed."""
    rng = np.random.default_rng(seed)
    lift = Affine(_glorot(rng, arch.width, arch.input_dim), np.zeros(arch.width))
    blocks = [Affine(_glorot(rng, arch.width, arch.width), np.zeros(arch.width))
              for _ in range(arch.depth)]
    proj = Affine(_glorot(rng, 1, arch.width), np.zeros(1))
    return NetworkParams(lift, blocks, proj)


def forward_batch(params, X):
    """Plain forward over rows of X (B, input_dim) -> values (B,)."""
    X = np.asarray(X, dtype=np.float64)
    v = X @ params.lift.W.T + params.lift.b
    for bl in params.blocks:
        v = v + np.tanh(v @ bl.W.T + bl.b)
    u = v @ params.proj.W.T + params.proj.b
    return u[:, 0]


def forward(params, point):
    """Forward at one space-time point -> scalar prediction."""
    point = np.asarray(point, dtype=np.float64)
    if point.shape != (params.input_dim,):
        raise ValueError(
            f"point dimension {point.shape} does not match input_dim {params.input_dim}")
    u = float(forward_batch(params, point[None])[0])
    if not np.isfinite(u):
        raise ArithmeticError(f"non-finite network output at point {point.tolist()}")
    return u


def param_arrays(params):
    """Parameter arrays in canonical (checkpoint) order."""
    out = [params.lift.W, params.lift.b]
    for bl in params.blocks:
        out.extend((bl.W, bl.b))
    out.extend((params.proj.W, params.proj.b))
    return out


def flatten(params):
    return np.concatenate([a.ravel() for a in param_arrays(params)])


def n_params(arch):
    w, d, m = arch.width, arch.depth, arch.input_dim
    return w * m + w + d * (w * w + w) + w + 1


def from_flat(arch, theta, copy=False):
    """Rebuild NetworkParams whose arrays view (or copy) a flat vector."""
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (n_params(arch),):
        raise ValueError(
            f"flat vector length {theta.shape} does not match architecture "
            f"({n_params(arch)} parameters)")
    if copy:
        theta = theta.copy()
    w, m = arch.width, arch.input_dim
    pos = 0

    def take(shape):
        nonlocal pos
        size = int(np.prod(shape))
        a = theta[pos:pos + size].reshape(shape)
        pos += size
        return a

    lift = Affine(take((w, m)), take((w,)))
    blocks = [Affine(take((w, w)), take((w,))) for _ in range(arch.depth)]
    proj = Affine(take((1, w)), take((1,)))
    return NetworkParams(lift, blocks, proj)


def save(params, path):
    """Versioned binary checkpoint: header + float64 little-endian data."""
    header = MAGIC + struct.pack(
        "<IIII", FORMAT_VERSION, params.width, params.depth, params.input_dim)
    body = flatten(params).astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(body)


def load(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    hsize = len(MAGIC) + 16
    if len(blob) < hsize or blob[:len(MAGIC)] != MAGIC:
        raise ValueError(f"not a network checkpoint: {path}")
    version, width, depth, input_dim = struct.unpack("<IIII", blob[len(MAGIC):hsize])
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    arch = Architecture(width, depth, input_dim)
    expected = n_params(arch) * 8
    found = len(blob) - hsize
    if found != expected:
        raise ValueError(
            f"checkpoint body has {found} bytes, expected {expected} for "
            f"width={width} depth={depth} input_dim={input_dim}")
    theta = np.frombuffer(blob[hsize:], dtype="<f8").astype(np.float64)
    return from_flat(arch, theta, copy=True)
