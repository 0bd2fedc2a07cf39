"""
Dense 2-D arrays with reverse-mode automatic differentiation, Adam, and parameter blobs
"""

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import CheckpointError, ShapeError

Number = Union[int, float]
CHECKPOINT_VERSION = 1


class DiffMatrix:
    """
    A 2-D float64 array that records how it was computed

    Calling backward() on a 1x1 result sweeps the recorded graph in reverse
    topological order and accumulates d(result)/d(self) into `grad` for every
    matrix that requires a gradient.
    """

    __slots__ = ("value", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(
        self,
        value,
        requires_grad: bool = False,
        name: Optional[str] = None,
        _parents: Tuple["DiffMatrix", ...] = (),
        _backward: Optional[Callable[[np.ndarray], None]] = None,
    ):
        array = np.array(value, dtype=np.float64)
        if array.ndim == 0:
            array = array.reshape(1, 1)
        elif array.ndim == 1:
            array = array.reshape(1, -1)
        elif array.ndim != 2:
            raise ShapeError(f"DiffMatrix must be 2-D, got shape {array.shape}")
        self.value = array
        self.grad = np.zeros_like(array)
        self.requires_grad = requires_grad or any(p.requires_grad for p in _parents)
        self._parents = _parents
        self._backward = _backward
        self.name = name

    @property
    def shape(self) -> Tuple[int, int]:
        return self.value.shape

    def __repr__(self) -> str:
        label = f" {self.name}" if self.name else ""
        return f"DiffMatrix{label}(shape={self.shape})"

    def item(self) -> float:
        if self.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 matrix, got {self.shape}")
        return float(self.value[0, 0])

    def zero_grad(self) -> None:
        self.grad = np.zeros_like(self.value)

    def backward(self) -> None:
        """Populate gradients of this scalar with respect to every upstream matrix"""
        if self.shape != (1, 1):
            raise ShapeError(f"backward() needs a scalar (1x1) loss, got {self.shape}")

        order: List[DiffMatrix] = []
        visited = set()
        stack: List[Tuple[DiffMatrix, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        for node in order:
            if node._parents:
                node.grad = np.zeros_like(node.value)
        self.grad = np.ones_like(self.value)
        for node in reversed(order):
            if node._backward is not None:
                node._backward(node.grad)

    # Operators

    def __add__(self, other: Union["DiffMatrix", Number]) -> "DiffMatrix":
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other: Union["DiffMatrix", Number]) -> "DiffMatrix":
        return add(self, scale(_lift(other), -1.0))

    def __rsub__(self, other: Number) -> "DiffMatrix":
        return add(_lift(other), scale(self, -1.0))

    def __neg__(self) -> "DiffMatrix":
        return scale(self, -1.0)

    def __mul__(self, other: Union["DiffMatrix", Number]) -> "DiffMatrix":
        if isinstance(other, DiffMatrix):
            return multiply(self, other)
        return scale(self, float(other))

    __rmul__ = __mul__

    def __matmul__(self, other: "DiffMatrix") -> "DiffMatrix":
        return matmul(self, other)

    @property
    def T(self) -> "DiffMatrix":
        return transpose(self)


def _lift(x: Union[DiffMatrix, Number]) -> DiffMatrix:
    if isinstance(x, DiffMatrix):
        return x
    return constant(x)


def constant(value) -> DiffMatrix:
    return DiffMatrix(value, requires_grad=False)


def _accumulate(target: DiffMatrix, delta: np.ndarray) -> None:
    if target.requires_grad:
        target.grad = target.grad + delta


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, int]) -> np.ndarray:
    """Sum a gradient back down to a row- or column-broadcast operand shape"""
    if grad.shape == shape:
        return grad
    out = grad
    if shape[0] == 1 and grad.shape[0] != 1:
        out = out.sum(axis=0, keepdims=True)
    if shape[1] == 1 and grad.shape[1] != 1:
        out = out.sum(axis=1, keepdims=True)
    return out


def _check_broadcast(a: DiffMatrix, b: DiffMatrix, op: str) -> None:
    for da, db in zip(a.shape, b.shape):
        if da != db and da != 1 and db != 1:
            raise ShapeError(f"{op}: incompatible shapes {a.shape} and {b.shape}")


# Forward ops

def add(a: DiffMatrix, b: DiffMatrix) -> DiffMatrix:
    """Elementwise sum; a 1-row or 1-column operand is broadcast"""
    _check_broadcast(a, b, "add")
    out_value = a.value + b.value

    def backward(grad: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(grad, a.shape))
        _accumulate(b, _unbroadcast(grad, b.shape))

    return DiffMatrix(out_value, _parents=(a, b), _backward=backward)


def multiply(a: DiffMatrix, b: DiffMatrix) -> DiffMatrix:
    """Elementwise product; a 1-row or 1-column operand is broadcast"""
    _check_broadcast(a, b, "multiply")
    out_value = a.value * b.value

    def backward(grad: np.ndarray) -> None:
        _accumulate(a, _unbroadcast(grad * b.value, a.shape))
        _accumulate(b, _unbroadcast(grad * a.value, b.shape))

    return DiffMatrix(out_value, _parents=(a, b), _backward=backward)


def scale(a: DiffMatrix, factor: float) -> DiffMatrix:
    def backward(grad: np.ndarray) -> None:
        _accumulate(a, grad * factor)

    return DiffMatrix(a.value * factor, _parents=(a,), _backward=backward)


def matmul(a: DiffMatrix, b: DiffMatrix) -> DiffMatrix:
    if a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} and {b.shape}")

    def backward(grad: np.ndarray) -> None:
        _accumulate(a, grad @ b.value.T)
        _accumulate(b, a.value.T @ grad)

    return DiffMatrix(a.value @ b.value, _parents=(a, b), _backward=backward)


def transpose(a: DiffMatrix) -> DiffMatrix:
    def backward(grad: np.ndarray) -> None:
        _accumulate(a, grad.T)

    return DiffMatrix(a.value.T, _parents=(a,), _backward=backward)


def relu(a: DiffMatrix) -> DiffMatrix:
    mask = a.value > 0

    def backward(grad: np.ndarray) -> None:
        _accumulate(a, grad * mask)

    return DiffMatrix(np.where(mask, a.value, 0.0), _parents=(a,), _backward=backward)


def log(a: DiffMatrix) -> DiffMatrix:
    if np.any(a.value <= 0):
        raise ShapeError("log: non-positive input")

    def backward(grad: np.ndarray) -> None:
        _accumulate(a, grad / a.value)

    return DiffMatrix(np.log(a.value), _parents=(a,), _backward=backward)


def total(a: DiffMatrix) -> DiffMatrix:
    """Sum of all entries as a 1x1 matrix"""
    def backward(grad: np.ndarray) -> None:
        _accumulate(a, np.full_like(a.value, grad[0, 0]))

    return DiffMatrix(a.value.sum(), _parents=(a,), _backward=backward)


def mean_pool_rows(a: DiffMatrix) -> DiffMatrix:
    """Column-wise mean over rows, shape (1, cols)"""
    rows = a.shape[0]
    if rows == 0:
        raise ShapeError("mean_pool_rows: empty input")

    def backward(grad: np.ndarray) -> None:
        _accumulate(a, np.repeat(grad / rows, rows, axis=0))

    return DiffMatrix(a.value.mean(axis=0, keepdims=True), _parents=(a,), _backward=backward)


def take_rows(a: DiffMatrix, rows: Sequence[int]) -> DiffMatrix:
    index = np.asarray(rows, dtype=np.int64)

    def backward(grad: np.ndarray) -> None:
        delta = np.zeros_like(a.value)
        np.add.at(delta, index, grad)
        _accumulate(a, delta)

    return DiffMatrix(a.value[index].reshape(len(index), a.shape[1]), _parents=(a,), _backward=backward)


def element(a: DiffMatrix, row: int, col: int) -> DiffMatrix:
    def backward(grad: np.ndarray) -> None:
        delta = np.zeros_like(a.value)
        delta[row, col] = grad[0, 0]
        _accumulate(a, delta)

    return DiffMatrix(a.value[row, col], _parents=(a,), _backward=backward)


def concat_cols(parts: Sequence[DiffMatrix]) -> DiffMatrix:
    """Join matrices with equal row counts side by side"""
    rows = {p.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ {sorted(rows)}")
    bounds = np.cumsum([0] + [p.shape[1] for p in parts])

    def backward(grad: np.ndarray) -> None:
        for part, lo, hi in zip(parts, bounds[:-1], bounds[1:]):
            _accumulate(part, grad[:, lo:hi])

    return DiffMatrix(np.concatenate([p.value for p in parts], axis=1), _parents=tuple(parts), _backward=backward)


def _check_mask(a: DiffMatrix, mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool).reshape(a.shape)
    if not mask.any(axis=1).all():
        raise ShapeError("masked softmax: a row has no unmasked entry")
    return mask


def row_softmax_masked(a: DiffMatrix, mask: np.ndarray) -> DiffMatrix:
    """Row-wise softmax; masked entries get probability exactly 0"""
    mask = _check_mask(a, mask)
    shifted = np.where(mask, a.value, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    expd = np.where(mask, np.exp(shifted), 0.0)
    probs = expd / expd.sum(axis=1, keepdims=True)

    def backward(grad: np.ndarray) -> None:
        inner = (grad * probs).sum(axis=1, keepdims=True)
        _accumulate(a, probs * (grad - inner))

    return DiffMatrix(probs, _parents=(a,), _backward=backward)


def row_log_softmax_masked(a: DiffMatrix, mask: np.ndarray) -> DiffMatrix:
    """Row-wise log-softmax; masked entries are set to 0 and receive no gradient"""
    mask = _check_mask(a, mask)
    shifted = np.where(mask, a.value, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    log_norm = np.log(np.where(mask, np.exp(shifted), 0.0).sum(axis=1, keepdims=True))
    log_probs = np.where(mask, shifted - log_norm, 0.0)
    probs = np.where(mask, np.exp(log_probs), 0.0)

    def backward(grad: np.ndarray) -> None:
        grad = np.where(mask, grad, 0.0)
        _accumulate(a, grad - probs * grad.sum(axis=1, keepdims=True))

    return DiffMatrix(log_probs, _parents=(a,), _backward=backward)


# Parameters

def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator, name: Optional[str] = None) -> DiffMatrix:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return DiffMatrix(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True, name=name)


def zeros_parameter(rows: int, cols: int, name: Optional[str] = None) -> DiffMatrix:
    return DiffMatrix(np.zeros((rows, cols)), requires_grad=True, name=name)


@dataclass
class AdamState:
    """Moment estimates for a named parameter set"""
    learning_rate: float = 0.01
    eps: float = 0.1
    beta1: float = 0.9
    beta2: float = 0.999
    step_count: int = 0
    first_moment: Dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: Dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: Mapping[str, DiffMatrix],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
    lr_scale: float = 1.0,
) -> AdamState:
    """
    One Adam update in place: theta -= lr * m_hat / (sqrt(v_hat) + eps)

    Args:
        params: Parameters to update, by name
        grads: Gradient per parameter name, same shapes
        state: Moment estimates, updated in place
        lr_scale: Multiplier on the learning rate

    Returns:
        The updated state
    """
    state.step_count += 1
    t = state.step_count
    lr = state.learning_rate * lr_scale

    for name, param in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != param.shape:
            raise ShapeError(f"adam_step: gradient of {name} has shape {grad.shape}, expected {param.shape}")
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(param.value)
            v = np.zeros_like(param.value)

        m = state.beta1 * m + (1 - state.beta1) * grad
        v = state.beta2 * v + (1 - state.beta2) * grad ** 2
        state.first_moment[name] = m
        state.second_moment[name] = v

        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        param.value = param.value - lr * m_hat / (np.sqrt(v_hat) + state.eps)

    return state


class Adam:
    """Adam over a fixed set of named parameters"""

    def __init__(self, params: Mapping[str, DiffMatrix], learning_rate: float = 0.01, eps: float = 0.1,
                 beta1: float = 0.9, beta2: float = 0.999, lr_scale: float = 1.0):
        self.params = dict(params)
        self.lr_scale = lr_scale
        self.state = AdamState(learning_rate=learning_rate, eps=eps, beta1=beta1, beta2=beta2)

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        adam_step(self.params, {name: grads[name] for name in self.params}, self.state, self.lr_scale)


# Checkpoint blobs

def save_params(path: Union[str, Path], params: Mapping[str, DiffMatrix], metadata: Optional[dict] = None) -> Path:
    """Write named arrays and JSON metadata to a .npz file; values round-trip bit-exactly"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {"version": CHECKPOINT_VERSION, "names": list(params), **(metadata or {})}
    arrays = {f"param__{name}": p.value for name, p in params.items()}
    with path.open("wb") as fh:
        np.savez(fh, __meta__=np.array(json.dumps(header)), **arrays)
    return path


def load_params(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], dict]:
    """Read a blob written by save_params"""
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as blob:
            header = json.loads(str(blob["__meta__"]))
            arrays = {name: blob[f"param__{name}"].astype(np.float64) for name in header["names"]}
    except (OSError, KeyError, ValueError) as e:
        raise CheckpointError(f"Cannot read checkpoint {path}: {e}") from e

    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"Unsupported checkpoint version {header.get('version')}")
    return arrays, header


def numerical_gradient(fn: Callable[[], float], param: DiffMatrix, step: float = 1e-5) -> np.ndarray:
    """Central finite differences of a scalar function with respect to one matrix"""
    grad = np.zeros_like(param.value)
    for idx in np.ndindex(param.shape):
        original = param.value[idx]
        param.value[idx] = original + step
        plus = fn()
        param.value[idx] = original - step
        minus = fn()
        param.value[idx] = original
        grad[idx] = (plus - minus) / (2 * step)
    return grad
