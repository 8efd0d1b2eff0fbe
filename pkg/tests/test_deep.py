import math

import numpy as np
import pytest

from graphclust import autodiff as ad
from graphclust.deep import (
    DeepHyper,
    Discriminator,
    GcnEncoder,
    TrainingError,
    arga_train,
    corrupt_features,
    encode_and_cluster,
    gae_train,
    gcn_forward,
    gcn_propagation,
    init_encoder,
    mvgrl_train,
    ppr_diffusion,
    prepare_features,
    train_discriminator,
)
from graphclust.graph import GraphError, Partition, build_graph
from graphclust.ingest import Dataset, synthetic_dataset
from graphclust.metrics import ari, nmi

from conftest import random_graph


def _two_k4() -> Dataset:
    edges = [(c * 4 + i, c * 4 + j) for c in range(2) for i in range(4) for j in range(i + 1, 4)]
    g = build_graph(edges, 8)
    return Dataset(g, np.eye(8), np.repeat([0, 1], 4), "two-k4", 2)


@pytest.fixture(scope="module")
def small():
    return synthetic_dataset(3, 20, 30, p_in=0.3, p_out=0.02, seed=1, name="planted-small")


# -------------------------------------------------------------- propagation

def test_ppr_two_path():
    g = build_graph([(0, 1)], 2)
    assert np.allclose(ppr_diffusion(g, 0.5), [[2 / 3, 1 / 3], [1 / 3, 2 / 3]])


@pytest.mark.parametrize("seed", range(5))
def test_ppr_positive_on_connected_graphs(seed):
    g = random_graph(15, 0.3, seed)
    from graphclust.graph import connected_components

    if connected_components(g).num_clusters != 1:
        pytest.skip("disconnected draw")
    assert np.all(ppr_diffusion(g, 0.2) > 0)


def test_ppr_limit_alpha_to_one(two_triangles):
    assert np.allclose(ppr_diffusion(two_triangles, 1 - 1e-9), np.eye(6), atol=1e-8)


def test_ppr_errors():
    with pytest.raises(ValueError):
        ppr_diffusion(build_graph([(0, 1)], 2), 1.0)
    with pytest.raises(GraphError):
        ppr_diffusion(build_graph([(0, 1)], 3), 0.2)


def test_gcn_propagation_properties(bridged_triangles):
    p = gcn_propagation(bridged_triangles)
    assert np.allclose(p, p.T) and np.all(p >= 0)


# ---------------------------------------------------------------------- GCN

def _encoder(weights, prop):
    return GcnEncoder([ad.Tensor(w, requires_grad=True) for w in weights], prop)


def test_identity_weights_single_node():
    g = build_graph([], 1)
    x = np.array([[0.3, -1.2]])
    enc = _encoder([np.eye(2), np.eye(2)], gcn_propagation(g))
    assert np.allclose(gcn_forward(enc, ad.Tensor(np.abs(x))).value, np.abs(x))


def test_zero_weights_give_zero(two_triangles):
    enc = _encoder([np.zeros((3, 4)), np.zeros((4, 2))], gcn_propagation(two_triangles))
    x = np.random.default_rng(0).normal(size=(6, 3))
    assert np.all(gcn_forward(enc, ad.Tensor(x)).value == 0)


def test_two_path_hand_computed(path2):
    # both nodes have degree 1 + self-loop, so every entry of P is 1/2
    enc = _encoder([np.array([[2.0]]), np.array([[3.0]])], gcn_propagation(path2))
    x = np.array([[1.0], [-3.0]])
    h = np.maximum(0.5 * (1.0 - 3.0) * 2.0, 0.0)  # both rows: relu(-2) = 0
    assert np.allclose(gcn_forward(enc, ad.Tensor(x)).value, [[h * 3.0], [h * 3.0]])
    x = np.array([[1.0], [5.0]])
    h = 0.5 * (1.0 + 5.0) * 2.0  # 6 on both rows
    assert np.allclose(gcn_forward(enc, ad.Tensor(x)).value, [[0.5 * 2 * h * 3.0]] * 2)


@pytest.mark.parametrize("seed", range(5))
def test_two_hop_locality(seed):
    g = random_graph(20, 0.1, seed)
    rng = np.random.default_rng(seed)
    enc = init_encoder(4, [5, 3], gcn_propagation(g), rng)
    x = rng.normal(size=(20, 4))
    u = int(rng.integers(20))
    a = (np.abs(gcn_propagation(g)) > 0).astype(int)
    near = (np.linalg.matrix_power(a, 2)[u] > 0)
    x2 = np.where(near[:, None], x, 0.0)
    z1 = gcn_forward(enc, ad.Tensor(x)).value[u]
    z2 = gcn_forward(enc, ad.Tensor(x2)).value[u]
    assert np.allclose(z1, z2, atol=1e-12)


def test_gcn_dimension_errors(two_triangles):
    enc = init_encoder(3, [4, 2], gcn_propagation(two_triangles), np.random.default_rng(0))
    with pytest.raises(GraphError):
        gcn_forward(enc, ad.Tensor(np.zeros((6, 5))))
    with pytest.raises(GraphError):
        gcn_forward(enc, ad.Tensor(np.zeros((5, 3))))
    with pytest.raises(GraphError):
        _encoder([np.zeros((3, 4)), np.zeros((5, 2))], gcn_propagation(two_triangles))


def test_prepare_and_corrupt_features():
    x = np.array([[3.0, 4.0], [0.0, 0.0], [1.0, 0.0]])
    assert np.allclose(prepare_features(x, True), [[0.6, 0.8], [0, 0], [1, 0]])
    assert np.array_equal(prepare_features(x, False), x)
    big = np.random.default_rng(0).normal(size=(30, 4))
    c = corrupt_features(big, np.random.default_rng(1))
    assert sorted(map(tuple, c)) == sorted(map(tuple, big))


# ---------------------------------------------------------------------- GAE

def test_gae_two_cliques():
    ds = _two_k4()
    best = max(ari(ds.labels, encode_and_cluster(gae_train(ds, DeepHyper.gae(seed=s)), ds, 2)[0]) for s in range(3))
    assert best == pytest.approx(1.0)


def test_gae_loss_decreases(small):
    enc = gae_train(small, DeepHyper.gae(epochs=15))
    assert enc.history[-1] < enc.history[0]
    assert all(b < a for a, b in zip(enc.history[:10], enc.history[1:10]))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_gae_nan_aborts_with_epoch(small):
    with pytest.raises(TrainingError, match=r"epoch \d+: reconstruction failed"):
        gae_train(small, DeepHyper.gae(epochs=3, lr=1e300))


def test_gae_beats_untrained_baseline(small):
    hyper = DeepHyper.gae(epochs=60, lr=0.01, pos_weight="auto")
    trained = nmi(small.labels, encode_and_cluster(gae_train(small, hyper), small, 3)[0])
    untrained = nmi(small.labels, encode_and_cluster(gae_train(small, hyper.with_(epochs=0)), small, 3)[0])
    assert trained >= untrained
    assert trained > 0.8


def test_features_must_be_nondegenerate():
    ds = _two_k4()
    bad = Dataset(ds.graph, np.zeros((8, 3)), ds.labels, "zeros", 2)
    with pytest.raises(ValueError):
        gae_train(bad)


# --------------------------------------------------------------------- ARGA

def test_discriminator_separates_shifted_gaussian():
    rng = np.random.default_rng(0)
    fake = rng.standard_normal((200, 8))
    disc = Discriminator.create(8, 64, rng)
    opt = ad.Adam(disc.params, lr=0.01)
    train_discriminator(disc, fake, rng, 300, opt, real_mean=3.0)
    real = rng.standard_normal((200, 8)) + 3.0
    acc = 0.5 * ((disc.prob(real) > 0.5).mean() + (disc.prob(fake) < 0.5).mean())
    assert acc > 0.9


def test_arga_trains_and_regularizes(small):
    hyper = DeepHyper.arga(epochs=30, lr=0.01)
    arga = arga_train(small, hyper)
    gae = gae_train(small, DeepHyper.gae(epochs=30, lr=0.01))
    assert len(arga.meta["disc_history"]) == 30
    assert all(math.isfinite(v) for v in arga.history)
    m_arga = float((arga.embed(small.features) ** 2).mean())
    m_gae = float((gae.embed(small.features) ** 2).mean())
    assert abs(m_arga - 1) < abs(m_gae - 1)


def test_arga_saturating_variant_runs(small):
    enc = arga_train(small, DeepHyper.arga(epochs=3, saturating_generator=True))
    assert len(enc.history) == 3


# -------------------------------------------------------------------- MVGRL

def test_mvgrl_two_cliques():
    ds = _two_k4()
    model = mvgrl_train(ds, DeepHyper.mvgrl(latent_dim=16, epochs=20, lr=0.01))
    part, z = encode_and_cluster(model, ds, 2)
    assert ari(ds.labels, part) == pytest.approx(1.0)
    assert z.shape == (8, 16)


def test_mvgrl_initial_loss_near_chance(small):
    model = mvgrl_train(small, DeepHyper.mvgrl(epochs=1, latent_dim=16))
    assert model.history[0] == pytest.approx(math.log(2), abs=0.1)


@pytest.mark.parametrize("layers", [1, 2, 3])
def test_mvgrl_pool_dimension(small, layers):
    model = mvgrl_train(small, DeepHyper.mvgrl(epochs=0, latent_dim=12, gcn_layers=layers))
    x = ad.Tensor(prepare_features(small.features, True))
    outs = gcn_forward(model.encoder_a, x, layers=True)
    assert len(outs) == layers
    assert model.readout(outs).shape == (1, 12)
    enc_a, enc_b, mlp = model
    assert mlp.shape == (12, 12) and enc_a is not enc_b


def test_mvgrl_learns_planted_blocks(small):
    model = mvgrl_train(small, DeepHyper.mvgrl(epochs=20, latent_dim=32, lr=0.01))
    assert model.history[-1] < model.history[0]
    assert nmi(small.labels, encode_and_cluster(model, small, 3)[0]) > 0.8


def test_encode_and_cluster_deterministic(small):
    enc = gae_train(small, DeepHyper.gae(epochs=5))
    a, za = encode_and_cluster(enc, small, 3, seed=4)
    b, zb = encode_and_cluster(enc, small, 3, seed=4)
    assert np.array_equal(a.assignment, b.assignment) and np.array_equal(za, zb)
    assert a.num_clusters == 3 and za.shape[0] == small.num_nodes


def test_training_is_seed_deterministic(small):
    h = DeepHyper.mvgrl(epochs=3, latent_dim=8)
    assert mvgrl_train(small, h).history == mvgrl_train(small, h).history
    assert gae_train(small, DeepHyper.gae(epochs=3)).history == gae_train(small, DeepHyper.gae(epochs=3)).history


def test_hyper_validation():
    with pytest.raises(ValueError):
        DeepHyper(lr=0)
    with pytest.raises(ValueError):
        DeepHyper(ppr_alpha=1.0)
    with pytest.raises(ValueError):
        DeepHyper(pos_weight=-1.0)
    assert DeepHyper.mvgrl().latent_dim == 128 and DeepHyper.mvgrl().epochs == 40
    assert DeepHyper(latent_dim=8, gcn_layers=3, hidden_dim=16).widths == [16, 16, 8]
