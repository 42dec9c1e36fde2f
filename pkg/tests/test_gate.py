import numpy as np
import pytest

from coolscreen import nncore as nn
from coolscreen.encoder import GraphBatch, featurize
from coolscreen.gate import (
    DivergenceDetected,
    EmptyBatch,
    GateModel,
    MissingLabels,
    MultiTaskDataset,
    StlModel,
    TrainConfig,
    gate_step_loss,
    load_model,
    loss_auto,
    loss_cons,
    loss_dis,
    loss_map,
    loss_reg,
    make_synthetic_tasks,
    manifold_embed,
    pearson,
    predict,
    save_model,
    train_gate,
    train_stl,
)
from coolscreen.molgraph import parse_smiles
from coolscreen.synthetic import random_molecules

from helpers import best_step_grad_error


def T(x):
    return nn.Tensor(np.atleast_2d(np.asarray(x, dtype=float)))


def _mlp(d, seed):
    return nn.MLP([d, 5, d], nn.make_rng(seed, "toy"))


def test_loss_examples():
    assert loss_reg(T([[1.0], [2.0]]), T([[1.0], [2.0]])).item() == 0.0
    assert loss_reg(T([[0.0]]), T([[3.0]])).item() == 9.0
    assert loss_reg(T([[1.0], [2.0]]), T([[2.0], [4.0]])).item() == 2.5
    assert loss_auto(T([1.0, 0.0]), T([0.0, 1.0])).item() == 2.0
    assert loss_cons(T([1.0]), T([-1.0])).item() == 4.0
    z = T(np.arange(6.0).reshape(3, 2))
    assert loss_auto(z, z).item() == 0.0 and loss_cons(z, z).item() == 0.0


def test_loss_errors():
    with pytest.raises(EmptyBatch):
        loss_reg(T(np.zeros((0, 1))), T(np.zeros((0, 1))))
    with pytest.raises(MissingLabels):
        loss_map(T(np.zeros((0, 1))), T(np.zeros((0, 1))))
    with pytest.raises(nn.ShapeMismatch):
        loss_auto(T([1.0, 0.0]), T([1.0]))
    with pytest.raises(nn.ShapeMismatch):
        loss_cons(T(np.ones((2, 2))), T(np.ones((3, 2))))
    h = _mlp(2, 0)
    with pytest.raises(nn.ShapeMismatch):
        loss_dis(T(np.ones((2, 2))), T(np.ones((5, 2))), h, h)


def test_dis_degenerate_cases(rng):
    h_s, h_t = _mlp(2, 1), _mlp(2, 2)
    piv = T(rng.normal(size=(2, 2)))
    pert = T(rng.normal(size=(6, 2)))
    assert loss_dis(piv, pert, h_s, h_s).item() == 0.0
    same = T(np.repeat(piv.value, 3, axis=0))
    assert loss_dis(piv, same, h_s, h_t).item() == 0.0


def test_map_zero_head_is_mean_square(rng):
    head = nn.MLP([3, 4, 1], rng)
    for p in head.parameters():
        p.value[:] = 0.0
    y = rng.normal(size=(7, 1))
    z = T(rng.normal(size=(7, 3)))
    assert loss_map(T(y), head(z)).item() == pytest.approx(np.mean(y ** 2), abs=1e-15)


def test_map_collapses_to_reg(rng):
    head = nn.MLP([3, 4, 1], rng)
    z = T(rng.normal(size=(5, 3)))
    y = T(rng.normal(size=(5, 1)))
    assert loss_map(y, head(z)).item() == loss_reg(y, head(z)).item()


def test_losses_match_naive_loops():
    for trial in range(100):
        rng = nn.make_rng(trial, "naive")
        N, d, M = int(rng.integers(1, 9)), int(rng.integers(1, 5)), int(rng.integers(1, 4))
        z, zh = rng.normal(size=(N, d)), rng.normal(size=(N, d))
        y, yh = rng.normal(size=(N, 1)), rng.normal(size=(N, 1))

        naive = sum((y[i, 0] - yh[i, 0]) ** 2 for i in range(N)) / N
        assert abs(loss_reg(T(y), T(yh)).item() - naive) < 1e-12
        assert abs(loss_map(T(y), T(yh)).item() - naive) < 1e-12

        naive = sum(sum((z[i, k] - zh[i, k]) ** 2 for k in range(d)) for i in range(N)) / N
        assert abs(loss_auto(T(z), T(zh)).item() - naive) < 1e-12
        assert abs(loss_cons(T(z), T(zh)).item() - naive) < 1e-12

        h_s, h_t = _mlp(d, 2 * trial), _mlp(d, 2 * trial + 1)
        pert = z.repeat(M, axis=0) + 0.1 * rng.normal(size=(N * M, d))
        total = 0.0
        for i in range(N):
            ms_i, mt_i = h_s.infer(z[i:i + 1])[0], h_t.infer(z[i:i + 1])[0]
            for j in range(M):
                row = pert[i * M + j:i * M + j + 1]
                ds = ms_i - h_s.infer(row)[0]
                dt = mt_i - h_t.infer(row)[0]
                total += sum((ds[k] - dt[k]) ** 2 for k in range(d))
        assert abs(loss_dis(T(z), T(pert), h_s, h_t).item() - total / (N * M)) < 1e-12


def _small_batch(n=8, seed=0):
    graphs = random_molecules(n, nn.make_rng(seed, "gate-batch"), min_atoms=3, max_atoms=9)
    return GraphBatch([featurize(g) for g in graphs])


def test_total_loss_gradient():
    cfg = TrainConfig(hidden=6, latent=4, perturbations=3)
    model = GateModel(("A", "B"), cfg.encoder_config, seed=3)
    batch = _small_batch()
    rng = nn.make_rng(0, "grad")
    Yb = rng.normal(size=(8, 2))
    Yb[::3, 1] = np.nan
    noise = rng.standard_normal((8 * 3, 4))
    err = nn.grad_check(lambda: gate_step_loss(model, batch, Yb, ("A", "B"), cfg, noise)[0], model.parameters())
    assert err < 1e-4


@pytest.mark.parametrize("seed", range(8))
def test_total_loss_gradient_many_instances(seed):
    cfg = TrainConfig(hidden=8, latent=4, perturbations=3)
    model = GateModel(("A", "B"), cfg.encoder_config, seed=seed)
    batch = _small_batch(seed=seed)
    rng = nn.make_rng(seed, "grad-many")
    Yb = rng.normal(size=(8, 2))
    noise = rng.standard_normal((8 * 3, 4))
    err = best_step_grad_error(lambda: gate_step_loss(model, batch, Yb, ("A", "B"), cfg, noise)[0],
                               model.parameters())
    assert err < 1e-4


def test_zero_weights_equal_reg():
    cfg = TrainConfig(hidden=8, latent=4, alpha=0, beta=0, gamma=0, delta=0, perturbations=2)
    model = GateModel(("A", "B"), cfg.encoder_config, seed=1)
    batch = _small_batch()
    Yb = nn.make_rng(1, "y").normal(size=(8, 2))
    noise = nn.make_rng(1, "n").standard_normal((16, 4))
    total, parts = gate_step_loss(model, batch, Yb, ("B", "A"), cfg, noise)
    assert total.item() == parts["reg"].item()
    assert set(parts) == {"reg", "auto", "cons", "map", "dis"}


def test_identity_transfers_zero_auto_and_cons():
    cfg = TrainConfig(hidden=8, latent=4, perturbations=2)
    model = GateModel(("A", "B"), cfg.encoder_config, seed=1)
    for net in list(model.transfer.values()) + list(model.inverse.values()):
        first, second = net.layers
        first.W.value = np.zeros_like(first.W.value)
        first.W.value[:4, :4] = np.eye(4)
        first.W.value[:4, 4:8] = -np.eye(4)
        first.b.value[:] = 0.0
        second.W.value = np.zeros_like(second.W.value)
        # leaky(x) - leaky(-x) = (1 + slope) x
        second.W.value[:4] = np.eye(4) / 1.01
        second.W.value[4:8] = -np.eye(4) / 1.01
        second.b.value[:] = 0.0
    batch = _small_batch()
    Yb = nn.make_rng(2, "y").normal(size=(8, 2))
    _, parts = gate_step_loss(model, batch, Yb, ("A", "B"), cfg, np.zeros((16, 4)))
    assert parts["auto"].item() < 1e-20
    assert parts["cons"].item() < 1e-20
    assert parts["dis"].item() < 1e-20


def _tiny_dataset(n=60, seed=0, **kw):
    graphs = random_molecules(n, nn.make_rng(seed, "gate-data"), min_atoms=3, max_atoms=12)
    return make_synthetic_tasks(n, graphs=graphs, seed=seed, **kw)


def test_single_task_gate_collapses_to_stl():
    ds = _tiny_dataset(tasks=("A",))
    cfg = TrainConfig(epochs=5, batch=16, lr=1e-3, hidden=8, latent=4, alpha=0, beta=0, gamma=0, delta=0,
                      perturbations=2)
    g = train_gate(ds, cfg)
    s = train_stl(ds, "A", cfg)
    assert [h["reg"] for h in g.history] == [h["total"] for h in s.history]
    assert [h["total"] for h in g.history] == [h["total"] for h in s.history]
    for k, v in s.model.encoder.state_dict().items():
        assert np.array_equal(v, g.model.encoder.state_dict()[k])


def test_training_is_deterministic_and_learns(tmp_path):
    ds = _tiny_dataset(n=120, rho=0.8)
    cfg = TrainConfig(epochs=40, batch=64, lr=3e-3, hidden=16, latent=8, perturbations=2)
    a = train_gate(ds, cfg, out_dir=str(tmp_path))
    b = train_gate(ds, cfg)
    assert [h["total"] for h in a.history] == [h["total"] for h in b.history]
    assert a.history[-1]["total"] <= 0.5 * a.history[0]["total"]
    assert set(a.history[-1]["val_r"]) == {"A", "B"}
    assert (tmp_path / "gate.cfw").exists() and (tmp_path / "gate_metrics.jsonl").exists()
    model, hyper = load_model(tmp_path / "gate.cfw")
    assert hyper["tasks"] == ["A", "B"] and hyper["train"]["epochs"] == 40
    assert np.array_equal(model.predict_many(ds.graphs[:5]), a.model.predict_many(ds.graphs[:5]))


def test_divergence_detected():
    ds = _tiny_dataset(n=20)
    ds.Y[np.flatnonzero(~ds.is_val)[0], 0] = np.inf
    with pytest.warns(RuntimeWarning), pytest.raises(DivergenceDetected):
        train_gate(ds, TrainConfig(epochs=2, hidden=8, latent=4, perturbations=1))


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(perturbations=0)
    with pytest.raises(ValueError):
        TrainConfig(alpha=-1.0)
    ds = _tiny_dataset(n=20)
    ds.Y[:, 1] = np.nan
    with pytest.raises(ValueError):
        train_gate(ds, TrainConfig(epochs=1))
    with pytest.raises(ValueError):
        train_stl(ds, "B", TrainConfig(epochs=1))


def test_synthetic_correlation_controls():
    ds = _tiny_dataset(n=200, rho=1.0, noise=0.0)
    assert pearson(ds.Y[:, 0], ds.Y[:, 1]) > 0.999
    ds = make_synthetic_tasks(500, rho=0.0, seed=4)
    assert abs(pearson(ds.Y[:, 0], ds.Y[:, 1])) < 0.1
    with pytest.raises(ValueError):
        make_synthetic_tasks(10, rho=1.5)


def test_scarcity_label_counts():
    ds = make_synthetic_tasks(300, seed=2, label_counts={"A": 200, "B": 50}, val_fraction=0.1)
    train = ~ds.is_val
    assert int((~np.isnan(ds.Y[train, 0])).sum()) == 200
    assert int((~np.isnan(ds.Y[train, 1])).sum()) == 50
    assert not np.isnan(ds.Y[ds.is_val]).any()


def test_dataset_csv_round_trip(tmp_path):
    ds = make_synthetic_tasks(30, seed=1, label_counts={"B": 5})
    path = tmp_path / "d.csv"
    ds.to_csv(path)
    back = MultiTaskDataset.from_csv(path)
    assert back.tasks == ds.tasks
    expected = {}
    for i, s in enumerate(ds.smiles):
        for k, t in enumerate(ds.tasks):
            if not np.isnan(ds.Y[i, k]):
                expected.setdefault(s, {})[t] = ds.Y[i, k]
    got = {s: {t: back.Y[i, k] for k, t in enumerate(back.tasks) if not np.isnan(back.Y[i, k])}
           for i, s in enumerate(back.smiles)}
    assert got == expected
    with pytest.raises(ValueError):
        MultiTaskDataset(["C"], [parse_smiles("C")], ("A", "B"), np.zeros((1, 1)))


def test_predict_and_manifold(tmp_path):
    model = GateModel(("A", "B"), TrainConfig(hidden=8, latent=4).encoder_config, seed=7)
    g1, g2 = parse_smiles("CC(=O)OCC"), parse_smiles("O=C(OCC)C")
    assert predict(g1, model) == predict(g1, model)
    p1, p2 = predict(g1, model), predict(g2, model)
    assert set(p1) == {"A", "B"}
    assert all(abs(p1[t] - p2[t]) < 1e-12 for t in p1)
    m = manifold_embed(g1, model)
    assert m.shape == (4,) and np.allclose(m, manifold_embed(g2, model), atol=1e-12)
    save_model(tmp_path / "m.cfw", model)
    back, _ = load_model(tmp_path / "m.cfw")
    assert predict(g1, back) == p1
    stl = StlModel("A", TrainConfig(hidden=8, latent=4).encoder_config)
    save_model(tmp_path / "s.cfw", stl)
    back, hyper = load_model(tmp_path / "s.cfw")
    assert isinstance(back, StlModel) and back.task == "A" and hyper["kind"] == "StlModel"


def test_predictions_finite_over_corpus():
    model = GateModel(("A", "B"), TrainConfig(hidden=8, latent=4).encoder_config, seed=0)
    graphs = random_molecules(200, nn.make_rng(9, "corpus"))
    assert np.isfinite(model.predict_many(graphs)).all()
