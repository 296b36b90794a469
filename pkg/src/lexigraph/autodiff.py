"""Reverse-mode automatic differentiation over dense 2-D float64 tensors.

Every value is a matrix (rows, cols). A Tape records each primitive
application in execution order; ``Tape.backward`` replays the records in
reverse and accumulates adjoints into every leaf, returning zeros for
leaves the loss never touched. A tape belongs to a single forward/backward
cycle and is thrown away afterwards.

The operator set is exactly what the graph network and its classifier
head need: dense linear algebra, column/row assembly, gather, segment
aggregation with a masked softmax, the usual pointwise nonlinearities,
row-wise layer normalisation and the log-softmax / NLL pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

Array = np.ndarray

_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


def as_matrix(value) -> Array:
    """Coerce input to a C-contiguous 2-D float64 array."""
    out = np.ascontiguousarray(value, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"expected a 2-D tensor, got shape {out.shape}")
    return out


class Var:
    """A tensor node on a tape. Leaves are inputs; the rest are op outputs."""

    __slots__ = ("value", "tape", "is_leaf", "name")

    def __init__(self, value: Array, tape: "Tape", is_leaf: bool, name: str | None):
        self.value = value
        self.tape = tape
        self.is_leaf = is_leaf
        self.name = name

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape  # type: ignore[return-value]

    def __repr__(self) -> str:
        tag = self.name or ("leaf" if self.is_leaf else "op")
        return f"Var({tag}, shape={self.value.shape})"


@dataclass
class _Record:
    out: Var
    inputs: tuple[Var, ...]
    # backward(adjoint of out) -> one adjoint per input, aligned with `inputs`
    backward: Callable[[Array], tuple[Array, ...]]


class Tape:
    """Ordered record of primitive applications for one forward pass."""

    def __init__(self) -> None:
        self._records: list[_Record] = []
        self._leaves: list[Var] = []

    def leaf(self, value, name: str | None = None) -> Var:
        var = Var(as_matrix(value), self, True, name)
        self._leaves.append(var)
        return var

    def constant(self, value, name: str | None = None) -> Var:
        """A non-leaf input: participates in the graph but collects no gradient."""
        return Var(as_matrix(value), self, False, name)

    def emit(self, value: Array, inputs: tuple[Var, ...], backward, op: str) -> Var:
        for v in inputs:
            if v.tape is not self:
                raise ValueError(f"{op}: input belongs to a different tape")
        if not np.isfinite(value).all():
            raise FloatingPointError(f"{op} produced a non-finite value")
        out = Var(value, self, False, None)
        self._records.append(_Record(out, inputs, backward))
        return out

    def backward(self, root: Var) -> dict[Var, Array]:
        """Accumulate d(root)/d(leaf) for every leaf on this tape.

        The root must be a 1x1 scalar. Leaves not reachable from the root
        get an all-zero gradient of their own shape.
        """
        if root.tape is not self:
            raise ValueError("root does not belong to this tape")
        if root.value.shape != (1, 1):
            raise ValueError(f"backward root must be 1x1, got {root.value.shape}")
        grads: dict[int, Array] = {id(root): np.ones((1, 1))}
        for rec in reversed(self._records):
            g_out = grads.pop(id(rec.out), None)
            if g_out is None:
                continue
            for var, g_in in zip(rec.inputs, rec.backward(g_out)):
                if g_in is None:
                    continue
                slot = grads.get(id(var))
                if slot is None:
                    grads[id(var)] = g_in.copy() if g_in.base is not None else g_in
                else:
                    slot += g_in
        result: dict[Var, Array] = {}
        for leaf in self._leaves:
            g = grads.get(id(leaf))
            result[leaf] = np.zeros_like(leaf.value) if g is None else g
        return result


def _same_tape(*vars_: Var) -> Tape:
    tape = vars_[0].tape
    for v in vars_[1:]:
        if v.tape is not tape:
            raise ValueError("operands live on different tapes")
    return tape


def _unbroadcast(grad: Array, shape: tuple[int, int]) -> Array:
    """Sum the adjoint back down to `shape` after numpy broadcasting."""
    if grad.shape == shape:
        return grad
    out = grad
    if shape[0] == 1 and grad.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    return out


def matmul(a: Var, b: Var) -> Var:
    tape = _same_tape(a, b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
    av, bv = a.value, b.value

    def bwd(g: Array):
        return g @ bv.T, av.T @ g

    return tape.emit(av @ bv, (a, b), bwd, "matmul")


def transpose(a: Var) -> Var:
    def bwd(g: Array):
        return (np.ascontiguousarray(g.T),)

    return a.tape.emit(np.ascontiguousarray(a.value.T), (a,), bwd, "transpose")


def add(a: Var, b: Var) -> Var:
    tape = _same_tape(a, b)
    out = a.value + b.value
    sa, sb = a.shape, b.shape

    def bwd(g: Array):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return tape.emit(out, (a, b), bwd, "add")


def mul(a: Var, b: Var) -> Var:
    tape = _same_tape(a, b)
    av, bv = a.value, b.value
    sa, sb = a.shape, b.shape

    def bwd(g: Array):
        return _unbroadcast(g * bv, sa), _unbroadcast(g * av, sb)

    return tape.emit(av * bv, (a, b), bwd, "mul")


def scale(a: Var, factor: float) -> Var:
    c = float(factor)

    def bwd(g: Array):
        return (g * c,)

    return a.tape.emit(a.value * c, (a,), bwd, "scale")


def concat_cols(*parts: Var) -> Var:
    tape = _same_tape(*parts)
    widths = [p.shape[1] for p in parts]
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ValueError(f"concat_cols row mismatch: {[p.shape for p in parts]}")
    splits = np.cumsum(widths)[:-1]

    def bwd(g: Array):
        return tuple(np.ascontiguousarray(c) for c in np.split(g, splits, axis=1))

    value = np.concatenate([p.value for p in parts], axis=1)
    return tape.emit(value, parts, bwd, "concat_cols")


def concat_rows(*parts: Var) -> Var:
    tape = _same_tape(*parts)
    heights = [p.shape[0] for p in parts]
    cols = {p.shape[1] for p in parts}
    if len(cols) != 1:
        raise ValueError(f"concat_rows column mismatch: {[p.shape for p in parts]}")
    splits = np.cumsum(heights)[:-1]

    def bwd(g: Array):
        return tuple(np.ascontiguousarray(c) for c in np.split(g, splits, axis=0))

    value = np.concatenate([p.value for p in parts], axis=0)
    return tape.emit(value, parts, bwd, "concat_rows")


def row_select(a: Var, indices) -> Var:
    idx = np.asarray(indices, dtype=np.int64)
    if idx.ndim != 1:
        raise ValueError("row_select indices must be 1-D")
    n = a.shape[0]
    if idx.size and (idx.min() < 0 or idx.max() >= n):
        raise IndexError(f"row_select index out of range for {n} rows")
    shape = a.shape

    def bwd(g: Array):
        buf = np.zeros(shape)
        np.add.at(buf, idx, g)
        return (buf,)

    return a.tape.emit(a.value[idx], (a,), bwd, "row_select")


def _check_segments(segments, count: int, num_segments: int, op: str) -> Array:
    seg = np.asarray(segments, dtype=np.int64)
    if seg.ndim != 1 or seg.size != count:
        raise ValueError(f"{op}: segment ids must be 1-D of length {count}")
    if seg.size and (seg.min() < 0 or seg.max() >= num_segments):
        raise ValueError(f"{op}: segment id out of range [0, {num_segments})")
    return seg


def segment_weighted_sum(values: Var, weights: Var, segments, num_segments: int) -> Var:
    """out[s] = sum over rows i with segments[i] == s of weights[i] * values[i].

    Segments with no member produce an all-zero output row.
    """
    tape = _same_tape(values, weights)
    m, d = values.shape
    if weights.shape != (m, 1):
        raise ValueError(f"weights must be ({m}, 1), got {weights.shape}")
    seg = _check_segments(segments, m, num_segments, "segment_weighted_sum")
    vv, wv = values.value, weights.value
    out = np.zeros((num_segments, d))
    np.add.at(out, seg, wv * vv)

    def bwd(g: Array):
        g_rows = g[seg]
        return wv * g_rows, (vv * g_rows).sum(axis=1, keepdims=True)

    return tape.emit(out, (values, weights), bwd, "segment_weighted_sum")


def masked_segment_softmax(scores: Var, segments, num_segments: int) -> Var:
    """Softmax of scores within each segment, with max subtraction.

    Produces one weight per input row; rows of the same segment sum to 1.
    Segment ids absent from `segments` are simply not represented in the
    output. Asking for weights of an empty segment is a caller bug, not a
    silently-zero result.
    """
    m = scores.shape[0]
    if scores.shape[1] != 1:
        raise ValueError(f"scores must be a column, got {scores.shape}")
    seg = _check_segments(segments, m, num_segments, "masked_segment_softmax")
    sv = scores.value[:, 0]
    seg_max = np.full(num_segments, -np.inf)
    np.maximum.at(seg_max, seg, sv)
    shifted = np.exp(sv - seg_max[seg])
    denom = np.zeros(num_segments)
    np.add.at(denom, seg, shifted)
    alpha = (shifted / denom[seg])[:, None]

    def bwd(g: Array):
        weighted = alpha * g
        seg_dot = np.zeros(num_segments)
        np.add.at(seg_dot, seg, weighted[:, 0])
        return (weighted - alpha * seg_dot[seg][:, None],)

    return scores.tape.emit(alpha, (scores,), bwd, "masked_segment_softmax")


def leaky_relu(a: Var, slope: float = 0.2) -> Var:
    av = a.value
    factor = np.where(av > 0.0, 1.0, float(slope))

    def bwd(g: Array):
        return (g * factor,)

    return a.tape.emit(av * factor, (a,), bwd, "leaky_relu")


def gelu(a: Var) -> Var:
    """Gaussian error linear unit, tanh approximation."""
    x = a.value
    inner = _GELU_C * (x + _GELU_A * x**3)
    t = np.tanh(inner)
    out = 0.5 * x * (1.0 + t)

    def bwd(g: Array):
        d_inner = _GELU_C * (1.0 + 3.0 * _GELU_A * x**2)
        grad = 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t**2) * d_inner
        return (g * grad,)

    return a.tape.emit(out, (a,), bwd, "gelu")


def layer_norm(a: Var, eps: float = 1e-5) -> Var:
    """Normalise each row to zero mean and unit variance (no affine part)."""
    x = a.value
    mu = x.mean(axis=1, keepdims=True)
    xc = x - mu
    var = (xc**2).mean(axis=1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    y = xc * inv

    def bwd(g: Array):
        g_mean = g.mean(axis=1, keepdims=True)
        gy_mean = (g * y).mean(axis=1, keepdims=True)
        return (inv * (g - g_mean - y * gy_mean),)

    return a.tape.emit(y, (a,), bwd, "layer_norm")


def log_softmax(a: Var) -> Var:
    x = a.value
    shifted = x - x.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    y = shifted - log_z

    def bwd(g: Array):
        return (g - np.exp(y) * g.sum(axis=1, keepdims=True),)

    return a.tape.emit(y, (a,), bwd, "log_softmax")


def nll_loss(log_probs: Var, targets) -> Var:
    """Mean negative log-likelihood of integer class targets."""
    idx = np.asarray(targets, dtype=np.int64)
    n, c = log_probs.shape
    if idx.ndim != 1 or idx.size != n:
        raise ValueError(f"targets must be 1-D of length {n}")
    if idx.size == 0:
        raise ValueError("nll_loss over an empty batch")
    if idx.min() < 0 or idx.max() >= c:
        raise ValueError(f"target class out of range [0, {c})")
    rows = np.arange(n)
    value = np.array([[-log_probs.value[rows, idx].mean()]])

    def bwd(g: Array):
        buf = np.zeros((n, c))
        buf[rows, idx] = -g[0, 0] / n
        return (buf,)

    return log_probs.tape.emit(value, (log_probs,), bwd, "nll_loss")


def sum_all(a: Var) -> Var:
    shape = a.shape

    def bwd(g: Array):
        return (np.full(shape, g[0, 0]),)

    return a.tape.emit(np.array([[a.value.sum()]]), (a,), bwd, "sum_all")


def rowwise_cosine(a: Var, b: Var) -> Var:
    """Cosine similarity of corresponding rows of two equal-shape matrices."""
    tape = _same_tape(a, b)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    av, bv = a.value, b.value
    na = np.linalg.norm(av, axis=1, keepdims=True)
    nb = np.linalg.norm(bv, axis=1, keepdims=True)
    if (na == 0).any() or (nb == 0).any():
        raise ValueError("rowwise_cosine on a zero row")
    dot = (av * bv).sum(axis=1, keepdims=True)
    cos = dot / (na * nb)

    def bwd(g: Array):
        ga = g * (bv / (na * nb) - cos * av / na**2)
        gb = g * (av / (na * nb) - cos * bv / nb**2)
        return ga, gb

    return tape.emit(cos, (a, b), bwd, "rowwise_cosine")


def dropout(a: Var, rate: float, rng: np.random.Generator) -> Var:
    """Inverted dropout. rate 0 is the identity; use only during training."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if rate == 0.0:
        return a
    mask = (rng.random(a.shape) >= rate) / (1.0 - rate)

    def bwd(g: Array):
        return (g * mask,)

    return a.tape.emit(a.value * mask, (a,), bwd, "dropout")


@dataclass
class FdFailure:
    tensor: str
    index: tuple[int, int]
    analytic: float
    numeric: float
    rel_err: float


@dataclass
class FdReport:
    """Outcome of a finite-difference gradient check."""

    max_rel_err: float
    num_checked: int
    tolerance: float
    failures: list[FdFailure] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


LossFn = Callable[[Tape, dict[str, Var]], Var]


def fd_check(
    loss_fn: LossFn,
    params: dict[str, Array],
    *,
    step: float = 1e-5,
    tolerance: float = 1e-5,
    num_samples: int = 100,
    seed: int = 0,
) -> FdReport:
    """Compare tape gradients against central finite differences.

    `loss_fn` is handed a fresh tape plus one leaf per parameter and must
    return a 1x1 loss. Up to `num_samples` coordinates are sampled without
    replacement across all parameters; each is perturbed by +-step and the
    symmetric difference quotient is compared with the analytic gradient
    as |analytic - numeric| / max(1, |analytic|).
    """
    params = {name: as_matrix(v) for name, v in params.items()}

    def run(values: dict[str, Array], want_grads: bool):
        tape = Tape()
        leaves = {name: tape.leaf(v, name) for name, v in values.items()}
        loss = loss_fn(tape, leaves)
        if loss.value.shape != (1, 1):
            raise ValueError("loss_fn must return a 1x1 scalar")
        if not want_grads:
            return loss.value[0, 0], None
        grads = tape.backward(loss)
        return loss.value[0, 0], {name: grads[var] for name, var in leaves.items()}

    _, analytic = run(params, True)
    assert analytic is not None

    names = sorted(params)
    sizes = np.array([params[n].size for n in names])
    total = int(sizes.sum())
    if total == 0:
        raise ValueError("no parameters to check")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(total, size=min(num_samples, total), replace=False)
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    max_err = 0.0
    failures: list[FdFailure] = []
    for flat in np.sort(chosen):
        which = int(np.searchsorted(offsets, flat, side="right") - 1)
        name = names[which]
        r, c = np.unravel_index(flat - offsets[which], params[name].shape)
        perturbed = dict(params)
        bumped = params[name].copy()
        bumped[r, c] += step
        perturbed[name] = bumped
        up, _ = run(perturbed, False)
        bumped2 = params[name].copy()
        bumped2[r, c] -= step
        perturbed[name] = bumped2
        down, _ = run(perturbed, False)
        numeric = (up - down) / (2.0 * step)
        ana = analytic[name][r, c]
        rel = abs(ana - numeric) / max(1.0, abs(ana))
        max_err = max(max_err, rel)
        if rel > tolerance:
            failures.append(FdFailure(name, (int(r), int(c)), float(ana), float(numeric), float(rel)))
    return FdReport(max_rel_err=float(max_err), num_checked=len(chosen), tolerance=tolerance, failures=failures)
