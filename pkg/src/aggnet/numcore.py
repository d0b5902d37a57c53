"""Dense float64 arithmetic helpers, seeded RNG and a finite-difference gradient checker.

Arrays are plain row-major ``numpy.float64`` ndarrays. Random draws come from
numpy's PCG64 bit generator; sub-streams are derived with ``SeedSequence.spawn``
so that a single 64-bit master seed fixes every draw of a run.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .errors import DimensionError, NumericError

DTYPE = np.float64
RNG_ALGORITHM = "PCG64"
NORM_EPS = 1e-12


def make_rng(seed: int | np.random.SeedSequence) -> np.random.Generator:
    """Return a PCG64-backed generator; identical seeds give identical streams."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF)
    return np.random.Generator(np.random.PCG64(seed))


def spawn_rngs(seed: int, names: list[str]) -> dict[str, np.random.Generator]:
    """Derive one independent stream per purpose from a master seed."""
    children = np.random.SeedSequence(int(seed) & 0xFFFF_FFFF_FFFF_FFFF).spawn(len(names))
    return {name: make_rng(child) for name, child in zip(names, children)}


def as_tensor(x) -> np.ndarray:
    # asarray keeps 0-d scalars 0-d (ascontiguousarray would promote them to 1-d)
    return np.asarray(x, dtype=DTYPE, order="C")


def matmul(a, b) -> np.ndarray:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects 2-d operands, got {a.ndim}-d and {b.ndim}-d")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"inner dimensions differ: {a.shape} @ {b.shape}")
    return a @ b


def check_finite(x: np.ndarray, what: str = "tensor") -> np.ndarray:
    if not np.all(np.isfinite(x)):
        raise NumericError(f"non-finite values in {what}")
    return x


def l2_normalize(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise L2 normalization. Returns (normalized, norms).

    Raises NumericError if any row has norm below 1e-12.
    """
    norms = np.sqrt(np.sum(v * v, axis=-1, keepdims=True))
    if np.any(norms < NORM_EPS):
        raise NumericError("cannot L2-normalize a (near) zero vector")
    return v / np.maximum(norms, NORM_EPS), norms


def l2_normalize_backward(y: np.ndarray, norms: np.ndarray, grad_y: np.ndarray) -> np.ndarray:
    return (grad_y - y * np.sum(y * grad_y, axis=-1, keepdims=True)) / norms


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=DTYPE)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - np.max(z, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / np.sum(e, axis=axis, keepdims=True)


class GradCheckResult(NamedTuple):
    ok: bool
    max_rel_error: float

    def __bool__(self):
        return self.ok


def numerical_grad(f: Callable[[np.ndarray], float], x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    x = as_tensor(x).copy()
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        fp = float(f(x))
        flat[i] = orig - eps
        fm = float(f(x))
        flat[i] = orig
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise NumericError(f"non-finite function value at coordinate {i}")
        gflat[i] = (fp - fm) / (2.0 * eps)
    return grad


def grad_check(f: Callable[[np.ndarray], float], x, analytic_grad, eps: float = 1e-5,
               tol: float = 1e-4) -> GradCheckResult:
    """Compare an analytic gradient with central finite differences.

    The error per coordinate is ``|fd_i - g_i| / max(1, |g_i|)``; the check
    passes when the largest one is at most ``tol``.
    """
    if not (0.0 < eps <= 1e-2):
        raise ValueError("eps must lie in (0, 1e-2]")
    x = as_tensor(x)
    g = as_tensor(analytic_grad)
    if g.shape != x.shape:
        raise DimensionError(f"gradient shape {g.shape} != input shape {x.shape}")
    fd = numerical_grad(f, x, eps)
    err = np.abs(fd - g) / np.maximum(1.0, np.abs(g))
    worst = float(err.max()) if err.size else 0.0
    return GradCheckResult(worst <= tol, worst)
