import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from torch import nn

from gebo_package.errors import EmptyBatch, NonFiniteLoss, SlotOutOfRange
from gebo_package.space import Configuration, MixedSpace, feature_blocks, flat_features

logger = logging.getLogger(__name__)

DTYPE = torch.float64
CHECKPOINT_FORMAT = "gebo-vgae/1"

DEFAULT_FEATURE_DIM = 8
DEFAULT_HIDDEN_DIM = 16
DEFAULT_LATENT_DIM = 4
DEFAULT_ALPHA = 0.1
DEFAULT_BETA = 0.1
DEFAULT_RANK_K = 1e-2
DEFAULT_LEARNING_RATE = 1e-2
DEFAULT_BATCH_SIZE = 16
EPS = 1e-8


def _init_linear(layer: nn.Linear, generator: torch.Generator) -> None:
    bound = 1.0 / math.sqrt(layer.in_features)
    with torch.no_grad():
        layer.weight.copy_((torch.rand(layer.weight.shape, generator=generator, dtype=DTYPE) * 2 - 1) * bound)
        if layer.bias is not None:
            layer.bias.copy_((torch.rand(layer.bias.shape, generator=generator, dtype=DTYPE) * 2 - 1) * bound)


class SlotEncoder(nn.Module):
    """Two graph-convolution layers read out at the global node, with Gaussian heads."""

    def __init__(self, feature_dim: int, hidden_dim: int, latent_dim: int):
        super().__init__()
        self.conv1 = nn.Linear(feature_dim, hidden_dim, bias=False)
        self.conv2 = nn.Linear(hidden_dim, hidden_dim, bias=False)
        self.mu_head = nn.Linear(hidden_dim, latent_dim)
        self.logvar_head = nn.Linear(hidden_dim, latent_dim)

    def reset(self, generator: torch.Generator) -> None:
        for layer in (self.conv1, self.conv2, self.mu_head, self.logvar_head):
            _init_linear(layer, generator)

    def conv_weights(self) -> List[torch.Tensor]:
        return [self.conv1.weight, self.conv2.weight]

    def forward(self, x: torch.Tensor, adj_hat: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        h = torch.relu(adj_hat @ self.conv1(x))
        h = torch.relu(adj_hat @ self.conv2(h))
        readout = h[:, -1, :]
        return self.mu_head(readout), self.logvar_head(readout)


class VgaeModel(nn.Module):
    """
    Per-variable projections, K slot encoders and a shared decoder.

    The decoder output has one score block of length n_i per discrete variable
    and one unit-scale scalar per continuous variable, in variable order.
    """

    def __init__(
        self,
        space: MixedSpace,
        n_slots: int,
        feature_dim: int = DEFAULT_FEATURE_DIM,
        hidden_dim: int = DEFAULT_HIDDEN_DIM,
        latent_dim: int = DEFAULT_LATENT_DIM,
        seed: int = 0,
    ):
        super().__init__()
        self.space = space
        self.n_slots = n_slots
        self.feature_dim = feature_dim
        self.hidden_dim = hidden_dim
        self.latent_dim = latent_dim

        self.projections = nn.ModuleList(nn.Linear(size, feature_dim) for size in space.feature_sizes)
        self.global_feature = nn.Parameter(torch.zeros(feature_dim))
        self.encoders = nn.ModuleList(SlotEncoder(feature_dim, hidden_dim, latent_dim) for _ in range(n_slots))
        self.decoder = nn.Sequential(
            nn.Linear(latent_dim, hidden_dim),
            nn.ReLU(),
            nn.Linear(hidden_dim, space.flat_size),
        )
        self.to(DTYPE)

        generator = torch.Generator().manual_seed(int(seed))
        for projection in self.projections:
            _init_linear(projection, generator)
        with torch.no_grad():
            bound = 1.0 / math.sqrt(feature_dim)
            self.global_feature.copy_((torch.rand(feature_dim, generator=generator, dtype=DTYPE) * 2 - 1) * bound)
        for encoder in self.encoders:
            encoder.reset(generator)
        for layer in self.decoder:
            if isinstance(layer, nn.Linear):
                _init_linear(layer, generator)
        # Adam per slot over its encoder and the shared parts; built on first training
        self.optimizers: Dict[int, torch.optim.Adam] = {}

    def check_slot(self, slot: int) -> None:
        if not 0 <= slot < self.n_slots:
            raise SlotOutOfRange(f"slot {slot} outside [0, {self.n_slots})")

    def reset_slot(self, slot: int, seed: int) -> None:
        """Re-initializes one slot encoder from a fresh random substream."""
        self.check_slot(slot)
        self.encoders[slot].reset(torch.Generator().manual_seed(int(seed)))
        self.optimizers.pop(slot, None)

    def optimizer(self, slot: int, learning_rate: float = DEFAULT_LEARNING_RATE) -> torch.optim.Adam:
        """The slot's Adam, kept across calls so its moment estimates accumulate."""
        self.check_slot(slot)
        optimizer = self.optimizers.get(slot)
        if optimizer is None or optimizer.param_groups[0]["lr"] != learning_rate:
            params = list(self.encoders[slot].parameters()) + list(self.shared_parameters())
            optimizer = torch.optim.Adam(params, lr=learning_rate, betas=(0.9, 0.999))
            self.optimizers[slot] = optimizer
        return optimizer

    def shared_parameters(self) -> Iterator[nn.Parameter]:
        yield from self.projections.parameters()
        yield self.global_feature
        yield from self.decoder.parameters()

    def node_inputs(self, blocks: Sequence[torch.Tensor]) -> torch.Tensor:
        """Projects the per-variable blocks and appends the global node: (B, n+1, F)."""
        projected = torch.stack([proj(block) for proj, block in zip(self.projections, blocks)], dim=1)
        glob = self.global_feature.expand(projected.shape[0], 1, self.feature_dim)
        return torch.cat([projected, glob], dim=1)

    def encode(self, blocks: Sequence[torch.Tensor], adj_hat: torch.Tensor, slot: int):
        self.check_slot(slot)
        return self.encoders[slot](self.node_inputs(blocks), adj_hat)


def normalize_adjacency(adj: np.ndarray) -> torch.Tensor:
    """
    Row-normalized aggregation matrix D_in^-1 (A^T + I) of a directed adjacency.

    `adj[i, j] = 1` means i -> j, so row i of the result averages node i and its
    in-neighbours.
    """
    incoming = np.asarray(adj, dtype=float).T + np.eye(adj.shape[0])
    return torch.as_tensor(incoming / incoming.sum(axis=1, keepdims=True), dtype=DTYPE)


def to_blocks(configs: Sequence[Configuration], space: MixedSpace) -> List[torch.Tensor]:
    return [torch.as_tensor(block, dtype=DTYPE) for block in feature_blocks(configs, space)]


def gcn_encode(
    cfg: Configuration, graph: np.ndarray, slot: int, model: VgaeModel
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    Encodes one configuration through a slot encoder.

    Args:
        cfg (Configuration): Configuration to embed.
        graph (np.ndarray): Augmented adjacency including the global node.
        slot (int): Encoder index.
        model (VgaeModel): The model.

    Returns:
        Tuple[torch.Tensor, torch.Tensor]: Mean and log-variance of the latent.
    """
    model.check_slot(slot)
    mu, logvar = model.encode(to_blocks([cfg], model.space), normalize_adjacency(graph), slot)
    return mu[0], logvar[0]


def encode_configurations(
    model: VgaeModel, configs: Sequence[Configuration], graph: np.ndarray, slot: int
) -> np.ndarray:
    """Posterior means of a batch of configurations, shape (N, M)."""
    with torch.no_grad():
        mu, _ = model.encode(to_blocks(configs, model.space), normalize_adjacency(graph), slot)
    return mu.numpy().copy()


def reparameterize(mu: torch.Tensor, logvar: torch.Tensor, generator: torch.Generator) -> torch.Tensor:
    eps = torch.randn(mu.shape, generator=generator, dtype=mu.dtype)
    return mu + torch.exp(0.5 * logvar) * eps


def head_slices(space: MixedSpace) -> List[Tuple[bool, slice]]:
    """(is_discrete, slice) of each variable inside the decoder output."""
    slices = []
    start = 0
    for var in space.variables:
        size = var.feature_size
        slices.append((var.is_discrete, slice(start, start + size)))
        start += size
    return slices


def decode(z: Union[np.ndarray, torch.Tensor], model: VgaeModel, space: Optional[MixedSpace] = None):
    """
    Decodes a latent point into a valid configuration.

    Discrete heads take their argmax (lowest index on ties); continuous outputs are
    clamped to [0, 1] and rescaled to the variable bounds.

    Returns:
        Tuple[Configuration, np.ndarray]: Configuration and raw decoder outputs.
    """
    space = space or model.space
    with torch.no_grad():
        raw = model.decoder(torch.as_tensor(np.asarray(z, dtype=float), dtype=DTYPE).reshape(1, -1))[0]
    raw = raw.numpy().copy()
    return configuration_from_raw(raw, space), raw


def configuration_from_raw(raw: np.ndarray, space: MixedSpace) -> Configuration:
    values = []
    for var, (is_discrete, cols) in zip(space.variables, head_slices(space)):
        if is_discrete:
            values.append(int(np.argmax(raw[cols])))
        else:
            lo, hi = var.bounds
            unit = float(np.clip(raw[cols][0], 0.0, 1.0))
            values.append(lo + unit * (hi - lo))
    return Configuration(tuple(values))


@dataclass
class TrainBatch:
    blocks: List[torch.Tensor]
    targets: torch.Tensor
    values: torch.Tensor
    weights: torch.Tensor
    positives: torch.Tensor
    negatives: torch.Tensor
    adjacency: List[torch.Tensor]

    def __len__(self) -> int:
        return int(self.values.shape[0])


def rank_weights(values: Sequence[float], k: float = DEFAULT_RANK_K) -> np.ndarray:
    """
    Rank-based sample weights proportional to 1 / (kN + rank), normalized to mean 1.

    rank(x) counts the points with a strictly larger objective value.
    """
    f = np.asarray(values, dtype=float)
    n = f.size
    ranks = (f[None, :] > f[:, None]).sum(axis=1)
    weights = 1.0 / (k * n + ranks)
    return weights / weights.mean()


def pair_indices(values: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Positive (closest objective value) and negative (farthest) partner of each anchor.
    """
    f = np.asarray(values, dtype=float)
    if f.size < 2:
        empty = np.zeros(0, dtype=int)
        return empty, empty
    gaps = np.abs(f[:, None] - f[None, :])
    closest = gaps.copy()
    np.fill_diagonal(closest, np.inf)
    farthest = gaps.copy()
    np.fill_diagonal(farthest, -np.inf)
    return np.argmin(closest, axis=1), np.argmax(farthest, axis=1)


def make_batch(
    configs: Sequence[Configuration],
    values: Sequence[float],
    space: MixedSpace,
    graphs: Sequence[np.ndarray],
    k: float = DEFAULT_RANK_K,
) -> TrainBatch:
    """
    Builds the full training batch; `graphs` holds the augmented adjacency of every slot.
    """
    positives, negatives = pair_indices(values)
    return TrainBatch(
        blocks=to_blocks(configs, space) if configs else [],
        targets=torch.as_tensor(flat_features(configs, space), dtype=DTYPE) if configs else torch.zeros(0),
        values=torch.as_tensor(np.asarray(values, dtype=float), dtype=DTYPE),
        weights=torch.as_tensor(rank_weights(values, k) if len(values) else np.zeros(0), dtype=DTYPE),
        positives=torch.as_tensor(positives, dtype=torch.long),
        negatives=torch.as_tensor(negatives, dtype=torch.long),
        adjacency=[normalize_adjacency(g) for g in graphs],
    )


def _all_samples(batch: TrainBatch) -> torch.Tensor:
    return torch.arange(len(batch))


def kl_divergence(mu: torch.Tensor, logvar: torch.Tensor) -> torch.Tensor:
    """Per-sample KL(N(mu, exp(logvar)) || N(0, I))."""
    return 0.5 * torch.sum(mu ** 2 + torch.exp(logvar) - 1.0 - logvar, dim=-1)


def reconstruction_error(raw: torch.Tensor, targets: torch.Tensor, space: MixedSpace) -> torch.Tensor:
    """
    Per-sample feature reconstruction: Brier score on softmaxed discrete heads plus
    squared error on continuous unit-scaled outputs.
    """
    error = torch.zeros(raw.shape[0], dtype=raw.dtype)
    for is_discrete, cols in head_slices(space):
        if is_discrete:
            probs = torch.softmax(raw[:, cols], dim=1)
            error = error + torch.sum((probs - targets[:, cols]) ** 2, dim=1)
        else:
            error = error + torch.sum((raw[:, cols] - targets[:, cols]) ** 2, dim=1)
    return error


def vae_loss(
    batch: TrainBatch,
    slot: int,
    model: VgaeModel,
    generator: Optional[torch.Generator] = None,
    index: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    """
    Mean over samples of KL plus rank-weighted feature reconstruction.

    Without a generator the posterior mean is decoded instead of a sample.
    `index` restricts the mean to a subset of the samples.
    """
    index = _all_samples(batch) if index is None else index
    blocks = [block[index] for block in batch.blocks]
    mu, logvar = model.encode(blocks, batch.adjacency[slot], slot)
    z = mu if generator is None else reparameterize(mu, logvar, generator)
    raw = model.decoder(z)
    recon = reconstruction_error(raw, batch.targets[index], model.space)
    return torch.mean(kl_divergence(mu, logvar) + batch.weights[index] * recon)


def log_ratio_loss(
    z_anchor: torch.Tensor,
    z_pos: torch.Tensor,
    z_neg: torch.Tensor,
    f_anchor: torch.Tensor,
    f_pos: torch.Tensor,
    f_neg: torch.Tensor,
    eps: float = EPS,
) -> torch.Tensor:
    """
    Squared gap between the latent distance log-ratio and the objective gap log-ratio,
    averaged over anchors.
    """
    dist_neg = torch.sqrt(torch.sum((z_anchor - z_neg) ** 2, dim=-1) + eps)
    dist_pos = torch.sqrt(torch.sum((z_anchor - z_pos) ** 2, dim=-1) + eps)
    gap_neg = torch.abs(f_anchor - f_neg) + eps
    gap_pos = torch.abs(f_anchor - f_pos) + eps
    diff = torch.log(dist_neg / dist_pos) - torch.log(gap_neg / gap_pos)
    return torch.mean(diff ** 2)


def metric_loss(
    batch: TrainBatch, slot: int, model: VgaeModel, index: Optional[torch.Tensor] = None
) -> torch.Tensor:
    if len(batch) < 2:
        return torch.zeros((), dtype=DTYPE)
    index = _all_samples(batch) if index is None else index
    # partners may fall outside the anchor subset, so every sample is encoded
    mu, _ = model.encode(batch.blocks, batch.adjacency[slot], slot)
    f = batch.values
    pos, neg = batch.positives[index], batch.negatives[index]
    return log_ratio_loss(mu[index], mu[pos], mu[neg], f[index], f[pos], f[neg])


def orth_reg(encoder: SlotEncoder) -> torch.Tensor:
    """Sum over graph-convolution weights W of ||W^T W - I||_F^2."""
    total = torch.zeros((), dtype=DTYPE)
    for weight in encoder.conv_weights():
        # nn.Linear stores W^T, so W^T W is weight @ weight.T
        gram = weight @ weight.T
        total = total + torch.sum((gram - torch.eye(gram.shape[0], dtype=gram.dtype)) ** 2)
    return total


def loss_total(
    batch: TrainBatch,
    slot: int,
    model: VgaeModel,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    generator: Optional[torch.Generator] = None,
    index: Optional[torch.Tensor] = None,
) -> torch.Tensor:
    if len(batch) == 0:
        raise EmptyBatch("cannot compute a loss on an empty batch")
    model.check_slot(slot)

    loss = vae_loss(batch, slot, model, generator, index)
    if alpha:
        loss = loss + alpha * metric_loss(batch, slot, model, index)
    if beta:
        loss = loss + beta * orth_reg(model.encoders[slot])
    return loss


def train(
    model: VgaeModel,
    slot: int,
    batch: TrainBatch,
    epochs: int,
    generator: torch.Generator,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    alpha: float = DEFAULT_ALPHA,
    beta: float = DEFAULT_BETA,
    batch_size: int = DEFAULT_BATCH_SIZE,
) -> List[float]:
    """
    Adam on the slot encoder plus the shared projections and decoder.

    Each epoch is one shuffled pass over the observations in mini-batches of
    `batch_size` anchors. The slot's optimizer persists between calls until
    the slot is reset.

    Args:
        model (VgaeModel): Model, updated in place.
        slot (int): Encoder to train.
        batch (TrainBatch): All observations.
        epochs (int): Number of passes.
        generator (torch.Generator): Stream for the shuffling and the reparameterization noise.

    Returns:
        List[float]: Mean mini-batch loss of every epoch.
    """
    if len(batch) == 0:
        raise EmptyBatch("cannot train on an empty dataset")
    if batch_size < 1:
        raise ValueError(f"batch_size must be positive, got {batch_size}")
    optimizer = model.optimizer(slot, learning_rate)
    n = len(batch)

    history = []
    for _ in range(epochs):
        order = torch.randperm(n, generator=generator) if generator is not None else torch.arange(n)
        losses = []
        for start in range(0, n, batch_size):
            optimizer.zero_grad()
            loss = loss_total(batch, slot, model, alpha=alpha, beta=beta, generator=generator,
                              index=order[start:start + batch_size])
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss.item()} on slot {slot}")
            loss.backward()
            optimizer.step()
            losses.append(float(loss.item()))
        history.append(float(np.mean(losses)))
    return history


def warm_up(
    model: VgaeModel, batch: TrainBatch, epochs: int, generator: torch.Generator, **kwargs
) -> Dict[int, List[float]]:
    """Trains every slot encoder (and the shared parts) for `epochs` epochs."""
    return {slot: train(model, slot, batch, epochs, generator, **kwargs) for slot in range(model.n_slots)}


def save_checkpoint(model: VgaeModel, path: Union[str, Path]) -> None:
    state = model.state_dict()
    torch.save(
        {
            "format": CHECKPOINT_FORMAT,
            "space": model.space.to_dict(),
            "n_slots": model.n_slots,
            "feature_dim": model.feature_dim,
            "hidden_dim": model.hidden_dim,
            "latent_dim": model.latent_dim,
            "shapes": {name: list(tensor.shape) for name, tensor in state.items()},
            "state_dict": state,
        },
        path,
    )


def load_checkpoint(path: Union[str, Path]) -> VgaeModel:
    payload = torch.load(path, weights_only=False)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"unsupported checkpoint format {payload.get('format')!r}")

    model = VgaeModel(
        MixedSpace.from_dict(payload["space"]),
        n_slots=payload["n_slots"],
        feature_dim=payload["feature_dim"],
        hidden_dim=payload["hidden_dim"],
        latent_dim=payload["latent_dim"],
    )
    for name, tensor in payload["state_dict"].items():
        if list(tensor.shape) != payload["shapes"][name]:
            raise ValueError(f"shape header mismatch for {name}")
    model.load_state_dict(payload["state_dict"])
    return model
