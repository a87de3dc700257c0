"""Small numeric kernel: parameter store, Adam, losses, gradient checking and
a Jacobi symmetric eigensolver.

Model tensors are float32 numpy arrays. The eigensolver works in float64 since
it only ever sees distance matrices with a few dozen rows.
"""

from __future__ import annotations

import math
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Callable, Iterator

import numpy as np

DTYPE = np.float32
IGNORE_LABEL = -100


@dataclass
class Param:
    """A named weight with an optional gradient buffer."""

    value: np.ndarray
    grad: np.ndarray | None = None
    trainable: bool = True

    def __post_init__(self):
        if self.grad is not None and self.grad.shape != self.value.shape:
            raise ValueError(f"grad shape {self.grad.shape} != value shape {self.value.shape}")


class ParamStore:
    """Ordered name -> Param mapping with deterministic iteration order."""

    def __init__(self):
        self._entries: OrderedDict[str, Param] = OrderedDict()

    def add(self, name: str, value: np.ndarray, trainable: bool = True) -> Param:
        if name in self._entries:
            raise KeyError(f"duplicate parameter name {name!r}")
        p = Param(np.ascontiguousarray(value, dtype=DTYPE), None, trainable)
        self._entries[name] = p
        return p

    def __getitem__(self, name: str) -> Param:
        return self._entries[name]

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __iter__(self) -> Iterator[str]:
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def items(self):
        return self._entries.items()

    def names(self) -> list[str]:
        return list(self._entries)

    def zero_grad(self) -> None:
        for p in self._entries.values():
            p.grad = None

    def accumulate(self, name: str, grad: np.ndarray) -> None:
        p = self._entries[name]
        if p.grad is None:
            p.grad = np.zeros_like(p.value)
        p.grad += grad

    def num_elements(self) -> int:
        return sum(p.value.size for p in self._entries.values())

    def trainable_names(self) -> list[str]:
        return [n for n, p in self._entries.items() if p.trainable]

    def copy(self) -> "ParamStore":
        out = ParamStore()
        for name, p in self._entries.items():
            out.add(name, p.value.copy(), p.trainable)
        return out


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(store: ParamStore, state: AdamState, lr: float, clear_grads: bool = True) -> ParamStore:
    """One bias-corrected Adam update of every trainable entry, in place.

    Frozen entries are not touched at all.
    """
    trainable = [(n, p) for n, p in store.items() if p.trainable]
    for name, p in trainable:
        if p.grad is None:
            raise ValueError(f"trainable parameter {name!r} has no gradient")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, p in trainable:
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p.value)
            state.v[name] = np.zeros_like(p.value)
        v = state.v[name]
        g = p.grad
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / bc1
        v_hat = v / bc2
        p.value -= (lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(DTYPE)
        if clear_grads:
            p.grad = None
    return store


def clip_grad_norm(store: ParamStore, max_norm: float) -> float:
    """Scale trainable grads so their global L2 norm is at most ``max_norm``."""
    total = 0.0
    for p in store._entries.values():
        if p.trainable and p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    norm = math.sqrt(total)
    if norm > max_norm > 0:
        scale = max_norm / (norm + 1e-12)
        for p in store._entries.values():
            if p.trainable and p.grad is not None:
                p.grad *= scale
    return norm


def linear_lr(step: int, total_steps: int, lr0: float) -> float:
    """Learning rate decaying linearly from ``lr0`` at step 0 to 0 at ``total_steps``."""
    if total_steps <= 0:
        raise ValueError("total_steps must be positive")
    if step < 0 or step > total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps}]")
    return lr0 * (1.0 - step / total_steps)


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _check_labels(logits: np.ndarray, labels, ignore_label: int) -> tuple[np.ndarray, np.ndarray]:
    labels = np.asarray(labels, dtype=np.int64).reshape(-1)
    logits = np.asarray(logits)
    if logits.ndim != 2 or logits.shape[0] != labels.shape[0]:
        raise ValueError(f"logits {logits.shape} do not match {labels.shape[0]} labels")
    n_classes = logits.shape[1]
    keep = labels != ignore_label
    bad = keep & ((labels < 0) | (labels >= n_classes))
    if bad.any():
        raise ValueError(f"label {int(labels[bad][0])} out of range [0, {n_classes})")
    if not keep.any():
        raise ValueError("every position is ignored; loss undefined")
    return labels, keep


def cross_entropy_with_grad(logits: np.ndarray, labels, ignore_label: int = IGNORE_LABEL):
    """Mean softmax cross-entropy over non-ignored rows and its logits gradient."""
    labels, keep = _check_labels(logits, labels, ignore_label)
    idx = np.nonzero(keep)[0]
    sel = logits[idx].astype(np.float64)
    z = sel - sel.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(z).sum(axis=1))
    tgt = labels[idx]
    losses = logsum - z[np.arange(len(idx)), tgt]
    loss = float(losses.mean())
    probs = np.exp(z - logsum[:, None])
    probs[np.arange(len(idx)), tgt] -= 1.0
    grad = np.zeros(logits.shape, dtype=logits.dtype)
    grad[idx] = (probs / len(idx)).astype(logits.dtype)
    return loss, grad


def cross_entropy(logits: np.ndarray, labels, ignore_label: int = IGNORE_LABEL) -> float:
    """Mean negative log-softmax of the gold class over non-ignored rows."""
    return cross_entropy_with_grad(logits, labels, ignore_label)[0]


def grad_check_detail(
    loss_fn: Callable[[bool], float],
    store: ParamStore,
    eps: float = 1e-3,
    samples: int = 8,
    seed: int = 0,
    names: list[str] | None = None,
    fd_dtype=np.float64,
    zero_tol: float = 1e-6,
) -> dict[str, float]:
    """Compare analytic and central-difference gradients per trainable entry.

    ``loss_fn(True)`` must return the loss and leave gradients in ``store``;
    ``loss_fn(False)`` only returns the loss. The analytic gradients come from
    the store at its own precision; the finite differences are evaluated on a
    ``fd_dtype`` copy of the weights, so the reference is not limited by
    float32 rounding. In each entry the ``samples`` largest-magnitude analytic
    coordinates plus ``samples`` random ones are checked. Per coordinate the
    relative error is ``|a - n| / max(|a|, |n|)``; coordinates where both are
    below ``zero_tol`` times the largest gradient anywhere count as zero.
    """
    store.zero_grad()
    base = loss_fn(True)
    if not math.isfinite(base):
        raise ValueError("loss is not finite")
    analytic = {n: (p.grad.copy() if p.grad is not None else np.zeros_like(p.value)) for n, p in store.items()}
    store.zero_grad()
    gmax = max((float(np.abs(g).max()) for g in analytic.values() if g.size), default=0.0)
    floor = zero_tol * gmax
    originals = {n: p.value for n, p in store.items()}
    for n, p in store.items():
        p.value = p.value.astype(fd_dtype)
    rng = np.random.default_rng(seed)
    result: dict[str, float] = {}
    try:
        for name in names or store.trainable_names():
            p = store[name]
            flat_a = analytic[name].reshape(-1).astype(np.float64)
            k = min(samples, flat_a.size)
            top = np.argsort(-np.abs(flat_a), kind="stable")[:k]
            rand = rng.choice(flat_a.size, size=k, replace=False)
            worst = 0.0
            flat_v = p.value.reshape(-1)
            for i in np.unique(np.concatenate([top, rand])):
                old = flat_v[i]
                flat_v[i] = old + eps
                up = loss_fn(False)
                flat_v[i] = old - eps
                down = loss_fn(False)
                flat_v[i] = old
                if not (math.isfinite(up) and math.isfinite(down)):
                    raise ValueError("loss is not finite under perturbation")
                num = (up - down) / (2.0 * eps)
                a = float(flat_a[i])
                scale = max(abs(a), abs(num))
                if scale <= floor or scale == 0.0:
                    continue
                worst = max(worst, abs(a - num) / scale)
            result[name] = worst
    finally:
        for n, p in store.items():
            p.value = originals[n]
    return result


def grad_check(loss_fn: Callable[[bool], float], store: ParamStore, eps: float = 1e-3, **kwargs) -> float:
    """Maximum relative error between analytic and finite-difference gradients."""
    detail = grad_check_detail(loss_fn, store, eps, **kwargs)
    return max(detail.values(), default=0.0)


def sym_eig(matrix, sym_tol: float = 1e-6, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(values, vectors)`` with values sorted in descending order and
    ``vectors[:, i]`` the unit eigenvector for ``values[i]``.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    asym = float(np.abs(a - a.T).max()) if a.size else 0.0
    if asym > sym_tol:
        raise ValueError(f"matrix is not symmetric (max |A - A^T| = {asym:.3g})")
    a = 0.5 * (a + a.T)
    n = a.shape[0]
    v = np.eye(n)
    scale = float(np.abs(a).max()) if a.size else 0.0
    for _ in range(max_sweeps):
        off = float(np.sqrt(np.sum(np.triu(a, 1) ** 2)))
        if off <= 1e-15 * max(scale, 1e-300):
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = 0.5 * math.atan2(2.0 * apq, a[q, q] - a[p, p])
                c, s = math.cos(theta), math.sin(theta)
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    return values[order], v[:, order]
