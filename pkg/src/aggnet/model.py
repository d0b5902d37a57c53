"""The differentiable AggNet pipeline.

feature net -> pooling (NetVLAD | GeM | Sum) -> FC -> batch norm -> L2 -> sign hash.
Every stage is a pair of functions: ``*_forward`` returns the output together
with a cache, ``*_backward`` consumes the cache and an upstream gradient. Sets of descriptors are stored as contiguous row blocks; ``starts``
holds the first row of each block so segment reductions are ``np.ufunc.reduceat``.
"""

from __future__ import annotations

import copy
import hashlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, FormatError
from .kmeans import kmeans
from .numcore import l2_normalize, l2_normalize_backward, softmax
from .scorer import LogisticScorer

POOLINGS = ("netvlad", "gem", "sum")
GEM_EPS = 1e-6


@dataclass
class HashConfig:
    enabled: bool = True
    penalty_weight: float = 0.1
    penalty_exponent: float = 3.0

    def __post_init__(self):
        if self.penalty_weight < 0 or self.penalty_exponent < 1:
            raise ConfigError("penalty_weight must be >= 0 and penalty_exponent >= 1")


@dataclass
class ModelConfig:
    d_in: int
    d: int = 128
    hidden: tuple[int, ...] = (128,)
    pooling: str = "netvlad"
    K: int = 8
    alpha: float = 10.0
    gem_p: float = 3.0
    hashing: HashConfig = field(default_factory=HashConfig)
    bn_momentum: float = 0.1
    bn_eps: float = 1e-5

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.pooling not in POOLINGS:
            raise ConfigError(f"pooling must be one of {POOLINGS}, got {self.pooling!r}")
        if self.d_in <= 0 or self.d <= 0 or any(h <= 0 for h in self.hidden):
            raise ConfigError("layer widths must be positive")
        if self.pooling == "netvlad" and self.K < 1:
            raise DimensionError("NetVLAD needs K >= 1")
        if self.gem_p < 1:
            raise ConfigError("GeM exponent must be >= 1")


# -- set bookkeeping ---------------------------------------------------------------

def set_starts(sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.int64)
    if sizes.ndim != 1 or len(sizes) == 0 or np.any(sizes < 1):
        raise DimensionError("every set needs at least one row")
    return np.concatenate([[0], np.cumsum(sizes)[:-1]])


def segment_ids(sizes) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=np.int64)
    return np.repeat(np.arange(len(sizes)), sizes)


def canonical_order(x: np.ndarray, sizes) -> np.ndarray:
    """Row permutation sorting each set lexicographically, so that pooled sums
    are accumulated in the same order whatever the member order was."""
    seg = segment_ids(sizes)
    keys = tuple(x[:, j] for j in range(x.shape[1] - 1, -1, -1)) + (seg,)
    return np.lexsort(keys)


# -- feature network ---------------------------------------------------------------

def feature_forward(params: dict, x_raw: np.ndarray, n_layers: int):
    """Fully connected net, tanh between layers, linear last layer, then row L2 norm."""
    a = np.asarray(x_raw, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != params["feat.W0"].shape[0]:
        raise DimensionError(f"feature net expects [m, {params['feat.W0'].shape[0]}], got {a.shape}")
    acts = [a]
    for l in range(n_layers):
        z = a @ params[f"feat.W{l}"] + params[f"feat.b{l}"]
        a = np.tanh(z) if l < n_layers - 1 else z
        acts.append(a)
    y, norms = l2_normalize(a)
    return y, (acts, y, norms)


def feature_backward(params: dict, cache, grad_y: np.ndarray, n_layers: int):
    acts, y, norms = cache
    g = l2_normalize_backward(y, norms, grad_y)
    grads = {}
    for l in reversed(range(n_layers)):
        if l < n_layers - 1:
            g = g * (1.0 - acts[l + 1] ** 2)
        grads[f"feat.W{l}"] = acts[l].T @ g
        grads[f"feat.b{l}"] = g.sum(0)
        g = g @ params[f"feat.W{l}"].T
    return g, grads


# -- poolings ----------------------------------------------------------------------

def sum_pool_forward(X: np.ndarray, starts: np.ndarray):
    v = np.add.reduceat(X, starts, axis=0)
    h, norms = l2_normalize(v)
    return h, (h, norms)


def sum_pool_backward(cache, grad_h: np.ndarray, seg: np.ndarray):
    h, norms = cache
    return l2_normalize_backward(h, norms, grad_h)[seg]


def gem_pool_forward(p: float, X: np.ndarray, sizes: np.ndarray, starts: np.ndarray):
    """Generalized mean ((1/n) sum max(x, eps)^p)^(1/p), evaluated in log space."""
    u = np.maximum(X, GEM_EPS)
    log_u = np.log(u)
    t = p * log_u
    seg = segment_ids(sizes)
    mx = np.maximum.reduceat(t, starts, axis=0)
    e = np.exp(t - mx[seg])
    ssum = np.add.reduceat(e, starts, axis=0)
    lse = mx + np.log(ssum)
    log_n = np.log(sizes.astype(np.float64))[:, None]
    out = np.exp((lse - log_n) / p)
    h, norms = l2_normalize(out)
    weights = e / ssum[seg]
    return h, (X, u, log_u, weights, lse, log_n, out, h, norms, seg, starts, p)


def gem_pool_backward(cache, grad_h: np.ndarray):
    X, u, log_u, weights, lse, log_n, out, h, norms, seg, starts, p = cache
    g_out = l2_normalize_backward(h, norms, grad_h)
    g_u = (g_out * out)[seg] * weights / u
    g_x = np.where(X > GEM_EPS, g_u, 0.0)
    mean_log = np.add.reduceat(weights * log_u, starts, axis=0)
    g_p = float(np.sum(g_out * out * (mean_log / p - (lse - log_n) / p ** 2)))
    return g_x, g_p


def vlad_residuals(X: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray, starts: np.ndarray):
    """Soft-assigned residual sums H[s, k, :] = sum_i A[i, k] (x_i - c_k)."""
    A = softmax(X @ a.T + b, axis=1)
    AX = A[:, :, None] * X[:, None, :]
    mass = np.add.reduceat(A, starts, axis=0)
    H = np.add.reduceat(AX, starts, axis=0) - mass[:, :, None] * c[None, :, :]
    return H, A, mass


def netvlad_pool_forward(params: dict, X: np.ndarray, starts: np.ndarray):
    """Residual matrix per set, flattened and L2-normalized to length K*d."""
    a, b, c = params["vlad.a"], params["vlad.b"], params["vlad.c"]
    if X.ndim != 2 or X.shape[1] != a.shape[1]:
        raise DimensionError(f"NetVLAD expects [n, {a.shape[1]}] descriptors, got {X.shape}")
    H, A, mass = vlad_residuals(X, a, b, c, starts)
    flat, norms = l2_normalize(H.reshape(H.shape[0], -1))
    return flat, (X, A, mass, flat, norms)


def netvlad_pool_backward(params: dict, cache, grad_flat: np.ndarray, seg: np.ndarray):
    X, A, mass, flat, norms = cache
    a, c = params["vlad.a"], params["vlad.c"]
    S, K, d = len(mass), c.shape[0], c.shape[1]
    g_H = l2_normalize_backward(flat, norms, grad_flat).reshape(S, K, d)
    g_Hi = g_H[seg]
    g_A = np.einsum("mkd,md->mk", g_Hi, X) - np.einsum("mkd,kd->mk", g_Hi, c)
    g_X = np.einsum("mk,mkd->md", A, g_Hi)
    grads = {"vlad.c": -np.einsum("sk,skd->kd", mass, g_H)}
    g_Z = A * (g_A - np.sum(A * g_A, axis=1, keepdims=True))
    grads["vlad.a"] = g_Z.T @ X
    grads["vlad.b"] = g_Z.sum(0)
    g_X += g_Z @ a
    return g_X, grads


def head_forward(params: dict, v: np.ndarray, bn_state: "BatchNormState", train: bool,
                 update_stats: bool = True):
    """FC reduction to d, batch norm, L2 normalization."""
    z = v @ params["fc.W"] + params["fc.b"]
    y, bn_cache = batchnorm_forward(z, params["bn.gamma"], params["bn.beta"], bn_state, train, update_stats)
    h, norms = l2_normalize(y)
    return h, (v, bn_cache, h, norms)


def head_backward(params: dict, cache, grad_h: np.ndarray):
    v, bn_cache, h, norms = cache
    grads = {}
    g_y = l2_normalize_backward(h, norms, grad_h)
    g_z, grads["bn.gamma"], grads["bn.beta"] = batchnorm_backward(bn_cache, g_y)
    grads["fc.W"] = v.T @ g_z
    grads["fc.b"] = g_z.sum(0)
    return g_z @ params["fc.W"].T, grads


def netvlad_forward(params: dict, X: np.ndarray, starts: np.ndarray, bn_state: "BatchNormState",
                    train: bool, update_stats: bool = True):
    """NetVLAD aggregation followed by the FC / batch-norm / L2 head; one unit row per set."""
    flat, p_cache = netvlad_pool_forward(params, X, starts)
    h, h_cache = head_forward(params, flat, bn_state, train, update_stats)
    return h, (p_cache, h_cache)


def netvlad_backward(params: dict, cache, grad_h: np.ndarray, seg: np.ndarray):
    p_cache, h_cache = cache
    g_flat, grads = head_backward(params, h_cache, grad_h)
    g_X, p_grads = netvlad_pool_backward(params, p_cache, g_flat, seg)
    grads.update(p_grads)
    return g_X, grads


# -- batch norm --------------------------------------------------------------------

@dataclass
class BatchNormState:
    running_mean: np.ndarray
    running_var: np.ndarray
    momentum: float = 0.1
    eps: float = 1e-5


def batchnorm_forward(z, gamma, beta, state: BatchNormState, train: bool, update_stats: bool = True):
    if train:
        S = z.shape[0]
        mu = z.mean(0)
        var = z.var(0)
        if update_stats:
            m = state.momentum
            unbiased = var * S / (S - 1) if S > 1 else var
            state.running_mean[:] = (1 - m) * state.running_mean + m * mu
            state.running_var[:] = (1 - m) * state.running_var + m * unbiased
    else:
        mu, var = state.running_mean, state.running_var
    inv_std = 1.0 / np.sqrt(var + state.eps)
    zhat = (z - mu) * inv_std
    return gamma * zhat + beta, (zhat, inv_std, gamma, train)


def batchnorm_backward(cache, grad_y):
    zhat, inv_std, gamma, train = cache
    g_gamma = np.sum(grad_y * zhat, 0)
    g_beta = grad_y.sum(0)
    g_zhat = grad_y * gamma
    if train:
        S = grad_y.shape[0]
        g_z = inv_std / S * (S * g_zhat - g_zhat.sum(0) - zhat * np.sum(g_zhat * zhat, 0))
    else:
        g_z = g_zhat * inv_std
    return g_z, g_gamma, g_beta


# -- hashing -----------------------------------------------------------------------

def hash_forward(cfg: HashConfig, h: np.ndarray) -> np.ndarray:
    """sign with sign(0) = +1; identity when hashing is disabled."""
    if not cfg.enabled:
        return h
    return np.where(h >= 0, 1.0, -1.0)


def hash_penalty(cfg: HashConfig, h: np.ndarray) -> float:
    """Mean over rows of ||h - sign(h)||_q^q (0 when hashing is disabled)."""
    if not cfg.enabled:
        return 0.0
    h = np.atleast_2d(h)
    r = np.abs(h - hash_forward(cfg, h))
    return float(np.sum(r ** cfg.penalty_exponent) / h.shape[0])


def hash_penalty_grad(cfg: HashConfig, h: np.ndarray) -> np.ndarray:
    """Gradient of hash_penalty with the binary target held fixed."""
    if not cfg.enabled:
        return np.zeros_like(h)
    h2 = np.atleast_2d(h)
    r = h2 - hash_forward(cfg, h2)
    q = cfg.penalty_exponent
    g = q * np.abs(r) ** (q - 1) * np.sign(r) / h2.shape[0]
    return g.reshape(h.shape)


def hash_backward(cfg: HashConfig, h: np.ndarray, grad_out: np.ndarray) -> np.ndarray:
    """Straight-through: copy grad_out past the sign and add the weighted penalty gradient."""
    if not cfg.enabled or cfg.penalty_weight == 0:
        return np.array(grad_out, dtype=np.float64, copy=True)
    return grad_out + cfg.penalty_weight * hash_penalty_grad(cfg, h)


# -- the model ---------------------------------------------------------------------

WEIGHT_DECAY_EXEMPT = ("feat.b", "fc.b", "vlad.b", "bn.beta", "gem.p", "scorer.beta")


def decays(name: str) -> bool:
    return not name.startswith(WEIGHT_DECAY_EXEMPT)


class AggNet:
    """Feature extractor, pooling, hash layer and logistic scorer with one flat parameter dict."""

    def __init__(self, config: ModelConfig, rng: np.random.Generator | None = None):
        self.config = config
        self.params: dict[str, np.ndarray] = {}
        self.training = False
        widths = [config.d_in, *config.hidden, config.d]
        rng = rng if rng is not None else np.random.default_rng(0)
        for l in range(len(widths) - 1):
            fan_in = widths[l]
            self.params[f"feat.W{l}"] = rng.standard_normal((fan_in, widths[l + 1])) / np.sqrt(fan_in)
            self.params[f"feat.b{l}"] = np.zeros(widths[l + 1])
        d, K = config.d, config.K
        self.bn = BatchNormState(np.zeros(d), np.ones(d), config.bn_momentum, config.bn_eps)
        if config.pooling == "netvlad":
            self.params["vlad.a"] = rng.standard_normal((K, d)) * 0.1
            self.params["vlad.b"] = np.zeros(K)
            self.params["vlad.c"] = rng.standard_normal((K, d)) / np.sqrt(d)
            # stacked identities: the initial head sums the K residual blocks
            self.params["fc.W"] = np.tile(np.eye(d), (K, 1)) / np.sqrt(K)
        else:
            # Sum/GeM already produce d values; the head starts as the identity map
            self.params["fc.W"] = np.eye(d)
        if config.pooling == "gem":
            self.params["gem.p"] = np.array(float(config.gem_p))
        self.params["fc.b"] = np.zeros(d)
        self.params["bn.gamma"] = np.ones(d)
        self.params["bn.beta"] = np.zeros(d)
        self.params["scorer.w"] = np.array(5.0)
        self.params["scorer.beta"] = np.array(0.0)

    # -- introspection -------------------------------------------------------------
    @property
    def n_layers(self) -> int:
        return len(self.config.hidden) + 1

    @property
    def hashing(self) -> HashConfig:
        return self.config.hashing

    @property
    def scorer(self) -> LogisticScorer:
        return LogisticScorer(float(self.params["scorer.w"]), float(self.params["scorer.beta"]),
                              normalizer=self.config.d if self.hashing.enabled else 1.0)

    def train(self, mode: bool = True) -> "AggNet":
        self.training = mode
        return self

    def eval(self) -> "AggNet":
        return self.train(False)

    def copy(self) -> "AggNet":
        return copy.deepcopy(self)

    def state(self) -> dict[str, np.ndarray]:
        out = {k: v.copy() for k, v in self.params.items()}
        out["bn.running_mean"] = self.bn.running_mean.copy()
        out["bn.running_var"] = self.bn.running_var.copy()
        return out

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        for k in self.params:
            self.params[k] = np.array(state[k], dtype=np.float64)
        self.bn.running_mean = np.array(state["bn.running_mean"], dtype=np.float64)
        self.bn.running_var = np.array(state["bn.running_var"], dtype=np.float64)

    def param_hash(self) -> str:
        h = hashlib.sha256()
        for k, v in sorted(self.state().items()):
            h.update(k.encode())
            h.update(np.ascontiguousarray(v, dtype="<f8").tobytes())
        return h.hexdigest()

    # -- forward / backward --------------------------------------------------------
    def features(self, x_raw: np.ndarray) -> np.ndarray:
        return feature_forward(self.params, x_raw, self.n_layers)[0]

    def forward(self, x_raw: np.ndarray, sizes, update_stats: bool = True):
        """Embed consecutive sets of raw samples.

        ``sizes[s]`` rows of ``x_raw`` form set s. Returns (codes, h, cache)
        where ``h`` is the unit-norm pre-hash vector of every set.
        """
        sizes = np.asarray(sizes, dtype=np.int64)
        starts = set_starts(sizes)
        if int(sizes.sum()) != len(x_raw):
            raise DimensionError(f"set sizes sum to {int(sizes.sum())}, got {len(x_raw)} rows")
        x_raw = np.asarray(x_raw, dtype=np.float64)
        if x_raw.ndim == 2 and np.any(sizes > 1):
            x_raw = x_raw[canonical_order(x_raw, sizes)]
        X, f_cache = feature_forward(self.params, x_raw, self.n_layers)
        pooling = self.config.pooling
        if pooling == "netvlad":
            v, p_cache = netvlad_pool_forward(self.params, X, starts)
        elif pooling == "gem":
            v, p_cache = gem_pool_forward(float(self.params["gem.p"]), X, sizes, starts)
        else:
            v, p_cache = sum_pool_forward(X, starts)
        h, h_cache = head_forward(self.params, v, self.bn, self.training, update_stats)
        codes = hash_forward(self.hashing, h)
        return codes, h, (sizes, f_cache, p_cache, h_cache, h)

    def backward(self, cache, grad_codes: np.ndarray) -> dict[str, np.ndarray]:
        """Gradients of (task loss + penalty_weight * hash penalty) w.r.t. every network parameter."""
        sizes, f_cache, p_cache, h_cache, h = cache
        seg = segment_ids(sizes)
        # straight-through: the code gradient is copied onto h unchanged; the
        # penalty acts on sqrt(d)*h and is averaged over coordinates
        cfg, k = self.hashing, self.hash_scale
        g_h = np.array(grad_codes, dtype=np.float64, copy=True)
        if cfg.enabled and cfg.penalty_weight:
            g_h += cfg.penalty_weight * k * hash_penalty_grad(cfg, k * h) / self.config.d
        g_v, grads = head_backward(self.params, h_cache, g_h)
        pooling = self.config.pooling
        if pooling == "netvlad":
            g_X, p_grads = netvlad_pool_backward(self.params, p_cache, g_v, seg)
            grads.update(p_grads)
        elif pooling == "gem":
            g_X, g_p = gem_pool_backward(p_cache, g_v)
            grads["gem.p"] = np.array(g_p)
        else:
            g_X = sum_pool_backward(p_cache, g_v, seg)
        _, f_grads = feature_backward(self.params, f_cache, g_X, self.n_layers)
        grads.update(f_grads)
        return grads

    @property
    def hash_scale(self) -> float:
        """Unit-norm vectors are scaled by sqrt(d) before hashing so that a
        perfectly balanced vector lands exactly on a {-1, +1} code."""
        return float(np.sqrt(self.config.d))

    def penalty(self, h: np.ndarray) -> float:
        """Quantization penalty of a batch: mean over sets and coordinates."""
        return hash_penalty(self.hashing, self.hash_scale * h) / self.config.d

    # -- deployment helpers (eval mode, no side effects) ---------------------------
    def _embed_eval(self, x_raw, sizes):
        was = self.training
        self.training = False
        try:
            return self.forward(x_raw, sizes, update_stats=False)
        finally:
            self.training = was

    def group_embed(self, enrolled: np.ndarray) -> np.ndarray:
        enrolled = np.atleast_2d(np.asarray(enrolled, dtype=np.float64))
        if len(enrolled) < 1:
            raise DimensionError("a group needs at least one member")
        return self._embed_eval(enrolled, [len(enrolled)])[0][0]

    def query_embed(self, x_raw: np.ndarray) -> np.ndarray:
        x = np.asarray(x_raw, dtype=np.float64).reshape(1, -1)
        return self._embed_eval(x, [1])[0][0]

    def embed_groups(self, groups: np.ndarray) -> np.ndarray:
        """[G, n, d_in] -> [G, d] codes, eval mode."""
        G, n, d_in = groups.shape
        return self._embed_eval(groups.reshape(G * n, d_in), np.full(G, n))[0]

    def embed_queries(self, queries: np.ndarray) -> np.ndarray:
        """[Q, d_in] -> [Q, d] codes, eval mode."""
        return self._embed_eval(queries, np.ones(len(queries), dtype=np.int64))[0]


def netvlad_init_kmeans(model: AggNet, descriptors: np.ndarray, rng: np.random.Generator,
                        K: int | None = None, alpha: float | None = None):
    """Set centroids to k-means centers and a_k = 2 alpha c_k, b_k = -alpha ||c_k||^2,
    so the initial soft assignment approximates nearest-centroid assignment."""
    K = model.config.K if K is None else K
    alpha = model.config.alpha if alpha is None else alpha
    res = kmeans(descriptors, K, rng)
    C = res.centroids
    model.params["vlad.c"] = C.copy()
    model.params["vlad.a"] = 2.0 * alpha * C
    model.params["vlad.b"] = -alpha * np.sum(C * C, axis=1)
    return res


# -- checkpoint I/O ----------------------------------------------------------------

CHECKPOINT_FORMAT = "aggnet-checkpoint/1"


def _config_lines(cfg: ModelConfig) -> list[str]:
    return [
        f"d_in={cfg.d_in}",
        f"d={cfg.d}",
        f"hidden={','.join(str(h) for h in cfg.hidden)}",
        f"pooling={cfg.pooling}",
        f"K={cfg.K}",
        f"alpha={cfg.alpha!r}",
        f"gem_p={cfg.gem_p!r}",
        f"hashing={'on' if cfg.hashing.enabled else 'off'}",
        f"penalty_weight={cfg.hashing.penalty_weight!r}",
        f"penalty_exponent={cfg.hashing.penalty_exponent!r}",
        f"bn_momentum={cfg.bn_momentum!r}",
        f"bn_eps={cfg.bn_eps!r}",
    ]


def save_checkpoint(model: AggNet, path) -> Path:
    """Text manifest at ``path`` plus a little-endian float64 blob ``<path>.bin``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    blob_name = path.name + ".bin"
    lines = [f"format={CHECKPOINT_FORMAT}", *_config_lines(model.config), f"blob_file={blob_name}"]
    blob = bytearray()
    for name, arr in sorted(model.state().items()):
        shape = "x".join(str(s) for s in arr.shape) or "scalar"
        lines.append(f"tensor.{name}={shape}@{len(blob)}")
        blob += np.ascontiguousarray(arr, dtype="<f8").tobytes()
    (path.parent / blob_name).write_bytes(bytes(blob))
    path.write_text("\n".join(lines) + "\n")
    return path


def load_checkpoint(path) -> AggNet:
    path = Path(path)
    meta: dict[str, str] = {}
    offset = 0
    for line in path.read_text().splitlines(keepends=True):
        text = line.strip()
        if text:
            if "=" not in text:
                raise FormatError(f"expected key=value, got {text!r}", offset, path)
            k, v = text.split("=", 1)
            meta[k] = v
        offset += len(line.encode())
    if meta.get("format") != CHECKPOINT_FORMAT:
        raise FormatError(f"not an aggnet checkpoint (format={meta.get('format')!r})", 0, path)
    try:
        cfg = ModelConfig(
            d_in=int(meta["d_in"]), d=int(meta["d"]),
            hidden=tuple(int(x) for x in meta["hidden"].split(",") if x),
            pooling=meta["pooling"], K=int(meta["K"]), alpha=float(meta["alpha"]),
            gem_p=float(meta["gem_p"]),
            hashing=HashConfig(meta["hashing"] == "on", float(meta["penalty_weight"]),
                               float(meta["penalty_exponent"])),
            bn_momentum=float(meta["bn_momentum"]), bn_eps=float(meta["bn_eps"]),
        )
    except KeyError as exc:
        raise FormatError(f"checkpoint missing key {exc}", 0, path) from None
    blob_path = path.parent / meta["blob_file"]
    blob = blob_path.read_bytes()
    state = {}
    for k, v in meta.items():
        if not k.startswith("tensor."):
            continue
        shape_s, off_s = v.split("@")
        shape = () if shape_s == "scalar" else tuple(int(s) for s in shape_s.split("x"))
        start = int(off_s)
        count = int(np.prod(shape)) if shape else 1
        end = start + 8 * count
        if end > len(blob):
            raise FormatError(f"tensor {k[7:]} runs past end of blob", len(blob), blob_path)
        state[k[7:]] = np.frombuffer(blob[start:end], dtype="<f8").reshape(shape).astype(np.float64)
    model = AggNet(cfg)
    model.load_state(state)
    return model


def config_dict(cfg: ModelConfig) -> dict:
    return asdict(cfg)
