"""Deep graph clustering: a GCN encoder trained as a graph autoencoder (GAE),
an adversarially regularized autoencoder (ARGA), or with a two-view
contrastive objective (MVGRL); embeddings are clustered with k-means.

All models run on :mod:`graphclust.autodiff`, full-graph, dense.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from graphclust.autodiff import (
    Adam,
    NumericFault,
    Tape,
    Tensor,
    add_row_broadcast,
    backward,
    bce_with_logits,
    bilinear,
    concat_cols,
    matmul,
    mean_rows,
    relu,
    scalar_mul,
    sigmoid,
    transpose,
)
from graphclust.graph import Graph, GraphError, Partition, matrix_view
from graphclust.ingest import Dataset
from graphclust.numerics import inverse, kmeans

__all__ = [
    "DeepHyper",
    "Discriminator",
    "GcnEncoder",
    "MvgrlModel",
    "TrainingError",
    "arga_train",
    "corrupt_features",
    "encode_and_cluster",
    "gae_train",
    "gcn_forward",
    "gcn_propagation",
    "init_encoder",
    "mvgrl_train",
    "ppr_diffusion",
    "prepare_features",
    "train_discriminator",
]


class TrainingError(NumericFault):
    """A loss or gradient went non-finite during training."""


@dataclass(frozen=True)
class DeepHyper:
    """Training hyperparameters.

    ``hidden_dim`` defaults to ``latent_dim``. ``pos_weight`` of 1 is the
    plain reconstruction loss over all node pairs; ``"auto"`` weights the
    positive (edge) class by the ratio of non-edges to edges.
    """

    lr: float = 0.001
    latent_dim: int = 32
    epochs: int = 50
    gcn_layers: int = 2
    hidden_dim: int | None = None
    disc_iters: int = 5
    disc_hidden: int = 64
    ppr_alpha: float = 0.2
    seed: int = 0
    normalize_features: bool = True
    pos_weight: float | str = 1.0
    saturating_generator: bool = False

    def __post_init__(self) -> None:
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        for name in ("latent_dim", "gcn_layers", "disc_iters", "disc_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ValueError("hidden_dim must be positive")
        if not 0 < self.ppr_alpha < 1:
            raise ValueError("ppr_alpha must lie in (0, 1)")
        if self.pos_weight != "auto" and not float(self.pos_weight) > 0:
            raise ValueError("pos_weight must be positive or 'auto'")

    @classmethod
    def gae(cls, **kw) -> "DeepHyper":
        return cls(**{"latent_dim": 32, "epochs": 50, **kw})

    @classmethod
    def arga(cls, **kw) -> "DeepHyper":
        return cls(**{"latent_dim": 32, "epochs": 50, "disc_iters": 5, **kw})

    @classmethod
    def mvgrl(cls, **kw) -> "DeepHyper":
        return cls(**{"latent_dim": 128, "epochs": 40, **kw})

    def with_(self, **kw) -> "DeepHyper":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    @property
    def widths(self) -> list[int]:
        hidden = self.hidden_dim or self.latent_dim
        return [hidden] * (self.gcn_layers - 1) + [self.latent_dim]


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, name: str) -> Tensor:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True, name=name)


def gcn_propagation(g: Graph) -> np.ndarray:
    """``D~^-1/2 (A + I) D~^-1/2``: symmetric, nonnegative, defined for every graph."""
    return matrix_view(g, "normalized-adjacency-with-self-loops")


def ppr_diffusion(g: Graph, alpha: float) -> np.ndarray:
    """Personalized-PageRank diffusion ``alpha (I - (1 - alpha) D^-1/2 A D^-1/2)^-1``."""
    if not 0 < alpha < 1:
        raise ValueError(f"alpha={alpha} must lie in (0, 1)")
    t = matrix_view(g, "normalized-adjacency")  # raises on isolated nodes
    # the spectrum of t lies in [-1, 1], so the system is never singular
    return alpha * inverse(np.eye(g.num_nodes) - (1.0 - alpha) * t)


def prepare_features(x: np.ndarray, normalize: bool) -> np.ndarray:
    """Float copy of the features, rows scaled to unit L2 norm if requested
    (all-zero rows are left as they are)."""
    x = np.array(x, dtype=np.float64)
    if normalize:
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        x /= np.where(norms > 0, norms, 1.0)
    return x


def corrupt_features(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Rows of ``x`` in random order (the same multiset of rows)."""
    return x[rng.permutation(len(x))]


@dataclass
class GcnEncoder:
    """Stack of graph convolutions ``H <- act(P H W)``: ReLU on hidden
    layers, identity on the output layer."""

    weights: list[Tensor]
    prop: np.ndarray
    normalize_features: bool = True
    history: list[float] = field(default_factory=list)
    meta: dict[str, object] = field(default_factory=dict)

    def __post_init__(self) -> None:
        for a, b in zip(self.weights, self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise GraphError(f"layer widths do not chain: {a.shape} then {b.shape}")
        if self.prop.shape[0] != self.prop.shape[1]:
            raise GraphError(f"propagation matrix must be square, got {self.prop.shape}")

    @property
    def params(self) -> list[Tensor]:
        return list(self.weights)

    @property
    def latent_dim(self) -> int:
        return self.weights[-1].shape[1]

    def embed(self, features: np.ndarray) -> np.ndarray:
        x = Tensor(prepare_features(features, self.normalize_features))
        return gcn_forward(self, x).value


def init_encoder(
    d_in: int, widths: Sequence[int], prop: np.ndarray, rng: np.random.Generator, normalize_features: bool = True
) -> GcnEncoder:
    dims = [d_in, *widths]
    weights = [_glorot(rng, dims[i], dims[i + 1], f"theta{i + 1}") for i in range(len(widths))]
    return GcnEncoder(weights, prop, normalize_features)


def gcn_forward(enc: GcnEncoder, x: Tensor, prop: np.ndarray | None = None, layers: bool = False):
    """``Z = P relu(P X W1) W2`` (for two layers). With ``layers=True``
    returns the output of every layer instead of only the last."""
    p = Tensor(enc.prop if prop is None else prop)
    if x.shape[0] != p.shape[0]:
        raise GraphError(f"{x.shape[0]} feature rows for a {p.shape[0]}-node propagation matrix")
    if x.shape[1] != enc.weights[0].shape[0]:
        raise GraphError(f"features have {x.shape[1]} columns, first layer expects {enc.weights[0].shape[0]}")
    h = x
    outs = []
    for i, w in enumerate(enc.weights):
        h = matmul(p, matmul(h, w))
        if i < len(enc.weights) - 1:
            h = relu(h)
        outs.append(h)
    return outs if layers else h


def _adjacency_targets(g: Graph) -> np.ndarray:
    a = matrix_view(g, "adjacency")
    return (a > 0).astype(np.float64)


def _pos_weight(setting: float | str, targets: np.ndarray) -> float:
    if setting != "auto":
        return float(setting)
    pos = float(targets.sum())
    return (targets.size - pos) / pos if pos > 0 else 1.0


def _check_features(ds: Dataset) -> None:
    if ds.num_nodes == 0:
        raise GraphError("empty dataset")
    if ds.features.ndim != 2 or ds.features.shape[1] == 0:
        raise GraphError("features must be a non-empty n x d matrix")
    if not np.all(np.isfinite(ds.features)):
        raise GraphError("features contain non-finite values")
    if np.allclose(ds.features, ds.features[0]):
        raise GraphError("features are degenerate: every row is identical")


def _step(loss_fn, opt: Adam, epoch: int, what: str) -> float:
    """One forward/backward/update; non-finite values abort with the epoch."""
    try:
        with Tape() as tape:
            loss = loss_fn()
            opt.zero_grad()
            backward(loss, tape)
        if tape.faults:
            raise NumericFault(f"{tape.faults} log-clamp faults")
    except NumericFault as exc:
        raise TrainingError(f"epoch {epoch}: {what} failed: {exc}") from exc
    opt.step()
    return loss.item()


def _reconstruction(z: Tensor, targets: np.ndarray, pos_weight: float) -> Tensor:
    return bce_with_logits(matmul(z, transpose(z)), targets, pos_weight)


def gae_train(ds: Dataset, hyper: DeepHyper | None = None) -> GcnEncoder:
    """Graph autoencoder: minimize the binary cross-entropy between the
    adjacency and ``sigmoid(Z Z^T)`` over all node pairs.

    The per-epoch loss is kept in ``encoder.history``.
    """
    hyper = hyper or DeepHyper.gae()
    _check_features(ds)
    rng = np.random.default_rng(hyper.seed)
    x = Tensor(prepare_features(ds.features, hyper.normalize_features))
    enc = init_encoder(ds.num_features, hyper.widths, gcn_propagation(ds.graph), rng, hyper.normalize_features)
    targets = _adjacency_targets(ds.graph)
    pw = _pos_weight(hyper.pos_weight, targets)
    opt = Adam(enc.params, lr=hyper.lr)
    for epoch in range(1, hyper.epochs + 1):
        enc.history.append(_step(lambda: _reconstruction(gcn_forward(enc, x), targets, pw), opt, epoch, "reconstruction"))
    enc.meta.update(model="gae", pos_weight=pw, normalize_features=hyper.normalize_features)
    return enc


@dataclass
class Discriminator:
    """Dense ``d -> hidden -> 1`` network with a ReLU hidden layer; outputs logits."""

    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def create(cls, d: int, hidden: int, rng: np.random.Generator) -> "Discriminator":
        return cls(
            _glorot(rng, d, hidden, "disc_w1"),
            Tensor(np.zeros((1, hidden)), requires_grad=True, name="disc_b1"),
            _glorot(rng, hidden, 1, "disc_w2"),
            Tensor(np.zeros((1, 1)), requires_grad=True, name="disc_b2"),
        )

    @property
    def params(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]

    def logits(self, z: Tensor) -> Tensor:
        h = relu(add_row_broadcast(matmul(z, self.w1), self.b1))
        return add_row_broadcast(matmul(h, self.w2), self.b2)

    def prob(self, z: np.ndarray) -> np.ndarray:
        return sigmoid(self.logits(Tensor(z))).value[:, 0]


def _disc_loss(disc: Discriminator, real: np.ndarray, fake: np.ndarray) -> Tensor:
    # -(1/n) sum [ln D(real) + ln(1 - D(fake))]
    n = len(real)
    ones = np.ones((n, 1))
    return bce_with_logits(disc.logits(Tensor(real)), ones) + bce_with_logits(
        disc.logits(Tensor(fake)), np.zeros((len(fake), 1))
    )


def train_discriminator(
    disc: Discriminator, fake: np.ndarray, rng: np.random.Generator, steps: int, opt: Adam, epoch: int = 0,
    real_mean: float = 0.0,
) -> float:
    """``steps`` updates separating standard-normal samples (label 1) from
    the constant rows of ``fake`` (label 0); returns the last loss."""
    loss = float("nan")
    for _ in range(steps):
        real = rng.standard_normal(fake.shape) + real_mean
        loss = _step(lambda: _disc_loss(disc, real, fake), opt, epoch, "discriminator step")
    return loss


def arga_train(ds: Dataset, hyper: DeepHyper | None = None) -> GcnEncoder:
    """Adversarially regularized graph autoencoder.

    Each epoch: ``disc_iters`` discriminator steps against a Gaussian prior
    on the (detached) embeddings, then one encoder step on the
    reconstruction loss plus a generator term that pushes the
    discriminator's verdict on ``Z`` toward "prior". The default generator
    term is the non-saturating ``-(1/n) sum ln D(z_i)``; with
    ``saturating_generator`` it is ``(1/n) sum ln(1 - D(z_i))``.
    """
    hyper = hyper or DeepHyper.arga()
    _check_features(ds)
    rng = np.random.default_rng(hyper.seed)
    x = Tensor(prepare_features(ds.features, hyper.normalize_features))
    enc = init_encoder(ds.num_features, hyper.widths, gcn_propagation(ds.graph), rng, hyper.normalize_features)
    disc = Discriminator.create(hyper.latent_dim, hyper.disc_hidden, rng)
    targets = _adjacency_targets(ds.graph)
    pw = _pos_weight(hyper.pos_weight, targets)
    enc_opt = Adam(enc.params, lr=hyper.lr)
    disc_opt = Adam(disc.params, lr=hyper.lr)
    n = ds.num_nodes
    disc_history: list[float] = []

    def encoder_loss() -> Tensor:
        z = gcn_forward(enc, x)
        verdict = disc.logits(z)
        if hyper.saturating_generator:
            gen = scalar_mul(bce_with_logits(verdict, np.zeros((n, 1))), -1.0)
        else:
            gen = bce_with_logits(verdict, np.ones((n, 1)))
        return _reconstruction(z, targets, pw) + gen

    for epoch in range(1, hyper.epochs + 1):
        z_fixed = gcn_forward(enc, x).value  # outside a tape: a constant
        disc_history.append(train_discriminator(disc, z_fixed, rng, hyper.disc_iters, disc_opt, epoch))
        enc.history.append(_step(encoder_loss, enc_opt, epoch, "encoder step"))
    enc.meta.update(
        model="arga",
        pos_weight=pw,
        normalize_features=hyper.normalize_features,
        discriminator=disc,
        disc_history=disc_history,
    )
    return enc


@dataclass
class MvgrlModel:
    """Two GCN encoders (adjacency view and diffusion view) with a shared
    linear projection head, a pooling layer and a bilinear discriminator."""

    encoder_a: GcnEncoder
    encoder_b: GcnEncoder
    projection: Tensor
    pool: Tensor
    disc_w: Tensor
    disc_b: Tensor
    history: list[float] = field(default_factory=list)
    meta: dict[str, object] = field(default_factory=dict)

    @property
    def params(self) -> list[Tensor]:
        return self.encoder_a.params + self.encoder_b.params + [self.projection, self.pool, self.disc_w, self.disc_b]

    @property
    def shared_mlp(self) -> Tensor:
        return self.projection

    def __iter__(self):
        return iter((self.encoder_a, self.encoder_b, self.projection))

    def readout(self, layer_outputs: Sequence[Tensor]) -> Tensor:
        """Graph vector: layer-wise mean readouts, concatenated, mapped by
        ``pool`` (``L*d_h -> d_h``) and squashed by a sigmoid."""
        pooled = mean_rows(layer_outputs[0])
        for h in layer_outputs[1:]:
            pooled = concat_cols(pooled, mean_rows(h))
        return sigmoid(matmul(pooled, self.pool))

    def embed(self, features: np.ndarray) -> np.ndarray:
        x = Tensor(prepare_features(features, self.encoder_a.normalize_features))
        return gcn_forward(self.encoder_a, x).value + gcn_forward(self.encoder_b, x).value

    def loss(self, x: np.ndarray, x_corrupt: np.ndarray) -> Tensor:
        """Mean binary cross-entropy over the four (node, graph) pairings:
        real nodes of each view against the other view's graph vector are
        positives; corrupted nodes against the same vectors are negatives."""
        real, fake = Tensor(x), Tensor(x_corrupt)
        la = gcn_forward(self.encoder_a, real, layers=True)
        lb = gcn_forward(self.encoder_b, real, layers=True)
        za = matmul(la[-1], self.projection)
        zb = matmul(lb[-1], self.projection)
        za_c = matmul(gcn_forward(self.encoder_a, fake), self.projection)
        zb_c = matmul(gcn_forward(self.encoder_b, fake), self.projection)
        ga, gb = self.readout(la), self.readout(lb)
        n = x.shape[0]
        ones, zeros = np.ones((n, 1)), np.zeros((n, 1))

        def score(z: Tensor, gvec: Tensor) -> Tensor:
            return add_row_broadcast(bilinear(z, self.disc_w, gvec), self.disc_b)

        total = (
            bce_with_logits(score(za, gb), ones)
            + bce_with_logits(score(zb, ga), ones)
            + bce_with_logits(score(za_c, gb), zeros)
            + bce_with_logits(score(zb_c, ga), zeros)
        )
        return scalar_mul(total, 0.25)


def _init_mvgrl(ds: Dataset, hyper: DeepHyper, rng: np.random.Generator) -> MvgrlModel:
    d_h = hyper.latent_dim
    widths = hyper.widths
    enc_a = init_encoder(ds.num_features, widths, gcn_propagation(ds.graph), rng, hyper.normalize_features)
    enc_b = init_encoder(ds.num_features, widths, ppr_diffusion(ds.graph, hyper.ppr_alpha), rng, hyper.normalize_features)
    return MvgrlModel(
        enc_a,
        enc_b,
        _glorot(rng, d_h, d_h, "projection"),
        _glorot(rng, sum(widths), d_h, "pool"),
        _glorot(rng, d_h, d_h, "disc_w"),
        Tensor(np.zeros((1, 1)), requires_grad=True, name="disc_b"),
    )


def mvgrl_train(ds: Dataset, hyper: DeepHyper | None = None) -> MvgrlModel:
    """Contrastive multi-view training: the adjacency view and the PPR
    diffusion view each get their own GCN encoder; a corrupted copy of the
    features (rows shuffled, fresh every epoch) supplies negatives.

    Unpacks as ``(encoder_a, encoder_b, shared_mlp)``.
    """
    hyper = hyper or DeepHyper.mvgrl()
    _check_features(ds)
    rng = np.random.default_rng(hyper.seed)
    x = prepare_features(ds.features, hyper.normalize_features)
    model = _init_mvgrl(ds, hyper, rng)
    opt = Adam(model.params, lr=hyper.lr)
    for epoch in range(1, hyper.epochs + 1):
        xc = corrupt_features(x, rng)
        model.history.append(_step(lambda: model.loss(x, xc), opt, epoch, "contrastive step"))
    model.meta.update(model="mvgrl", ppr_alpha=hyper.ppr_alpha, normalize_features=hyper.normalize_features)
    return model


def encode_and_cluster(
    model: GcnEncoder | MvgrlModel, ds: Dataset, k: int, seed: int = 0, n_init: int = 10
) -> tuple[Partition, np.ndarray]:
    """Embed every node and cluster the embeddings with k-means
    (``n_init`` restarts, lowest inertia kept)."""
    z = model.embed(ds.features)
    return kmeans(z, k, seed=seed, n_init=n_init).partition, z
