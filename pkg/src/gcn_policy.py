"""
Graph-convolutional actor-critic: a stack of GCN layers and three linear heads
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, Literal, Optional, Tuple, Union

import numpy as np
import structlog

from .errors import CheckpointError, ShapeError
from .numerics import (
    DiffMatrix,
    concat_cols,
    constant,
    glorot_uniform,
    load_params,
    matmul,
    mean_pool_rows,
    multiply,
    relu,
    row_log_softmax_masked,
    row_softmax_masked,
    save_params,
    scale,
    take_rows,
    total,
    zeros_parameter,
)
from .sim_env import FEATURE_DIM, Action, Observation, Pass, SelectTask

logger = structlog.get_logger()

ActMode = Literal["sample", "greedy"]


def normalized_adjacency(num_nodes: int, edges: np.ndarray) -> np.ndarray:
    """
    Dense D^-1/2 A D^-1/2 for an edge list that already holds reverse edges and self-loops

    Degrees count the self-loop. Duplicate edges are merged.
    """
    adjacency = np.zeros((num_nodes, num_nodes), dtype=np.float64)
    if edges.size:
        if edges.max() >= num_nodes or edges.min() < 0:
            raise ShapeError(f"Edge endpoint outside node range 0..{num_nodes - 1}")
        adjacency[edges[1], edges[0]] = 1.0
    degree = adjacency.sum(axis=1)
    inv_sqrt = np.where(degree > 0, 1.0 / np.sqrt(np.maximum(degree, 1e-12)), 0.0)
    return adjacency * inv_sqrt[:, None] * inv_sqrt[None, :]


def gcn_layer(
    features: DiffMatrix,
    edges: Union[np.ndarray, DiffMatrix],
    weight: DiffMatrix,
    bias: Optional[DiffMatrix] = None,
) -> DiffMatrix:
    """
    One graph convolution: h_i' = sum_j (d_i d_j)^-1/2 h_j W (+ b)

    Args:
        features: Node features, one row per node
        edges: (2, E) message-passing edges, or a precomputed normalized adjacency
        weight: (in, out) weight matrix
        bias: Optional (1, out) bias

    Returns:
        New node features
    """
    if isinstance(edges, DiffMatrix):
        propagation = edges
    else:
        propagation = constant(normalized_adjacency(features.shape[0], np.asarray(edges)))
    if propagation.shape != (features.shape[0], features.shape[0]):
        raise ShapeError(f"Adjacency {propagation.shape} does not match {features.shape[0]} nodes")

    out = matmul(matmul(propagation, features), weight)
    if bias is not None:
        out = out + bias
    return out


@dataclass
class PolicyOutput:
    """Distribution over [available tasks..., pass], value estimate and entropy"""
    probs: DiffMatrix
    log_probs: DiffMatrix
    value: DiffMatrix
    entropy: DiffMatrix
    mask: np.ndarray

    @property
    def probabilities(self) -> np.ndarray:
        return self.probs.value[0].copy()


class PolicyParams:
    """All trainable matrices of the network, by name"""

    def __init__(self, window: int, hidden_width: int = 64, layers: Optional[int] = None,
                 seed: int = 0, input_width: int = FEATURE_DIM):
        self.window = window
        self.hidden_width = hidden_width
        self.layers = layers if layers is not None else 1 + window
        self.input_width = input_width
        if self.layers < 1:
            raise ValueError("a policy needs at least one graph convolution")

        rng = np.random.default_rng(seed)
        self.matrices: Dict[str, DiffMatrix] = {}
        fan_in = input_width
        for i in range(self.layers):
            self._add(f"gcn{i}.weight", glorot_uniform(fan_in, hidden_width, rng))
            self._add(f"gcn{i}.bias", zeros_parameter(1, hidden_width))
            fan_in = hidden_width
        for head in ("node_head", "pass_head", "value_head"):
            self._add(f"{head}.weight", glorot_uniform(hidden_width, 1, rng))
            self._add(f"{head}.bias", zeros_parameter(1, 1))

    def _add(self, name: str, matrix: DiffMatrix) -> None:
        matrix.name = name
        self.matrices[name] = matrix

    def __getitem__(self, name: str) -> DiffMatrix:
        return self.matrices[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self.matrices)

    def items(self):
        return self.matrices.items()

    def trunk_names(self) -> Tuple[str, ...]:
        return tuple(n for n in self.matrices if n.startswith("gcn"))

    def actor_names(self) -> Tuple[str, ...]:
        return self.trunk_names() + ("node_head.weight", "node_head.bias", "pass_head.weight", "pass_head.bias")

    def critic_names(self) -> Tuple[str, ...]:
        return self.trunk_names() + ("value_head.weight", "value_head.bias")

    def zero_grad(self) -> None:
        for matrix in self.matrices.values():
            matrix.zero_grad()

    def snapshot(self) -> Dict[str, np.ndarray]:
        return {name: m.value.copy() for name, m in self.matrices.items()}

    def restore(self, values: Dict[str, np.ndarray]) -> None:
        for name, value in values.items():
            if name not in self.matrices or self.matrices[name].shape != value.shape:
                raise CheckpointError(f"Parameter {name} does not fit this architecture")
            self.matrices[name].value = np.array(value, dtype=np.float64)

    def metadata(self) -> dict:
        return {
            "window": self.window,
            "hidden_width": self.hidden_width,
            "layers": self.layers,
            "input_width": self.input_width,
        }


class GCNPolicy:
    """Actor-critic network over observation sub-DAGs"""

    def __init__(self, params: PolicyParams, use_cp_feature: bool = True):
        self.params = params
        self.use_cp_feature = use_cp_feature

    @classmethod
    def create(cls, window: int, hidden_width: int = 64, layers: Optional[int] = None,
               seed: int = 0, use_cp_feature: bool = True) -> "GCNPolicy":
        return cls(PolicyParams(window, hidden_width, layers, seed), use_cp_feature)

    @property
    def window(self) -> int:
        return self.params.window

    def embed(self, obs: Observation) -> DiffMatrix:
        """Final node embeddings after every graph convolution"""
        propagation = constant(normalized_adjacency(obs.num_nodes, obs.edges))
        h = constant(obs.features)
        for i in range(self.params.layers):
            h = gcn_layer(h, propagation, self.params[f"gcn{i}.weight"], self.params[f"gcn{i}.bias"])
            if i < self.params.layers - 1:
                h = relu(h)
        return h

    def forward(self, obs: Observation) -> PolicyOutput:
        """
        Score every available task, the pass action and the state value

        Args:
            obs: Observation with at least one available task

        Returns:
            PolicyOutput over the observation's action map plus pass
        """
        if not obs.action_map:
            raise ShapeError("Observation has an empty action map")

        p = self.params
        h = self.embed(obs)
        pooled = mean_pool_rows(h)

        node_logits = matmul(take_rows(h, obs.available_rows), p["node_head.weight"]) + p["node_head.bias"]
        pass_logit = matmul(pooled, p["pass_head.weight"]) + p["pass_head.bias"]
        value = matmul(pooled, p["value_head.weight"]) + p["value_head.bias"]

        logits = concat_cols([node_logits.T, pass_logit])
        mask = obs.action_mask().reshape(1, -1)
        probs = row_softmax_masked(logits, mask)
        log_probs = row_log_softmax_masked(logits, mask)
        entropy = scale(total(multiply(probs, log_probs)), -1.0)

        return PolicyOutput(probs=probs, log_probs=log_probs, value=value, entropy=entropy, mask=mask[0])

    def act(self, output: PolicyOutput, mode: ActMode = "sample",
            rng: Optional[np.random.Generator] = None) -> Action:
        """Sample from the distribution (training) or take its argmax (evaluation)"""
        probs = output.probabilities
        if mode == "greedy":
            choice = int(np.argmax(probs))
        elif mode == "sample":
            rng = rng if rng is not None else np.random.default_rng()
            choice = int(rng.choice(len(probs), p=probs / probs.sum()))
        else:
            raise ValueError(f"Unknown action mode {mode!r}")

        if choice == len(probs) - 1:
            return Pass()
        return SelectTask(choice)

    def save(self, path: Union[str, Path], **extra) -> Path:
        metadata = {**self.params.metadata(), "use_cp_feature": self.use_cp_feature, **extra}
        return save_params(path, self.params.matrices, metadata)

    @classmethod
    def load(cls, path: Union[str, Path], window: Optional[int] = None) -> Tuple["GCNPolicy", dict]:
        """
        Restore a checkpoint

        Args:
            path: Checkpoint file
            window: Expected window; a mismatch is an error

        Returns:
            (policy, checkpoint metadata)
        """
        arrays, meta = load_params(path)
        try:
            ckpt_window = int(meta["window"])
            hidden = int(meta["hidden_width"])
            layers = int(meta["layers"])
        except (KeyError, TypeError, ValueError) as e:
            raise CheckpointError(f"Checkpoint {path} lacks architecture metadata") from e
        if window is not None and window != ckpt_window:
            raise CheckpointError(f"Checkpoint was trained with window {ckpt_window}, requested {window}")

        params = PolicyParams(ckpt_window, hidden, layers, input_width=int(meta.get("input_width", FEATURE_DIM)))
        if set(arrays) != set(params.matrices):
            raise CheckpointError("Checkpoint parameters do not match the declared architecture")
        params.restore(arrays)
        logger.debug("Checkpoint loaded", path=str(path), window=ckpt_window, layers=layers)
        return cls(params, bool(meta.get("use_cp_feature", True))), meta


def action_column(action: Action, num_actions: int) -> int:
    """Position of an action in the [tasks..., pass] distribution"""
    if isinstance(action, Pass):
        return num_actions - 1
    return action.index
