import numpy as np
import pytest

from coolscreen import demo, nncore as nn
from coolscreen.gate import GateModel, TrainConfig
from coolscreen.molgraph import parse_smiles
from coolscreen.surrogate import (
    EmbeddingTable,
    MissingEmbedding,
    ProvenanceMismatch,
    SurrogateConfig,
    SurrogateModel,
    Teacher,
    TeacherUnavailable,
    build_lookup,
    fidelity_report,
    pair_inputs,
    predict_pair,
    sample_pairs,
    surrogate_input,
    train_surrogate,
)


def _leaky(x):
    return x if x > 0 else 0.01 * x


def _naive_forward(model, x):
    """Row-by-row, scalar-loop reimplementation of the surrogate layers."""
    def dense(layer, v, act):
        W, b = layer.W.value, layer.b.value[0]
        out = []
        for j in range(W.shape[1]):
            s = b[j]
            for i in range(W.shape[0]):
                s += v[i] * W[i, j]
            out.append(_leaky(s) if act else s)
        return out

    h = list(x)
    for layer in model.trunk:
        h = dense(layer, h, True)
    row = []
    for t in model.tasks:
        y = h
        tower = model.towers[t]
        for k, layer in enumerate(tower):
            y = dense(layer, y, k < len(tower) - 1)
        row.append(y[0])
    return np.array(row)


def _small_teacher(seed=0):
    return Teacher(GateModel(("A", "B"), TrainConfig(hidden=8, latent=4).encoder_config, seed=seed))


def test_layer_shapes():
    m = SurrogateModel(16)
    assert [(l.W.value.shape) for l in m.trunk] == [(32, 64), (64, 50)]
    assert len(m.towers) == 10
    for tower in m.towers.values():
        assert [l.W.value.shape for l in tower] == [(50, 32), (32, 16), (16, 1)]


def test_forward_matches_naive_oracle(rng):
    m = SurrogateModel(4, seed=3)
    x = rng.normal(size=(5, 8))
    fast = m.infer_scaled(x)
    for i in range(5):
        assert np.max(np.abs(fast[i] - _naive_forward(m, x[i]))) < 1e-12
    assert np.allclose(m(nn.Tensor(x)).value, fast, atol=1e-14, rtol=0)


def test_zero_weights_give_zero_vector():
    m = SurrogateModel(3)
    for p in m.parameters():
        p.value[:] = 0.0
    table = EmbeddingTable(["a", "b"], np.ones((2, 3)), "x")
    assert np.array_equal(predict_pair("a", "b", m, table), np.zeros(10))


def test_surrogate_input_order():
    e1, e2 = np.eye(16)[0], np.eye(16)[1]
    table = EmbeddingTable(["a", "b"], np.vstack([e1, e2]), "p")
    x = surrogate_input("a", "b", table)
    assert x.shape == (32,) and np.array_equal(x, np.concatenate([e1, e2]))
    assert not np.array_equal(x, surrogate_input("b", "a", table))
    assert np.array_equal(pair_inputs([("a", "b")], table)[0], x)
    with pytest.raises(MissingEmbedding):
        surrogate_input("a", "zzz", table)
    with pytest.raises(MissingEmbedding):
        pair_inputs([("q", "a")], table)


def test_table_round_trip_and_immutability(tmp_path, rng):
    table = EmbeddingTable(["CCO", "CCCl", "OC(=O)C"], rng.normal(size=(3, 5)), "f" * 64)
    sha = table.save(tmp_path / "t.emb1")
    back = EmbeddingTable.load(tmp_path / "t.emb1")
    assert back.ids == table.ids and back.provenance == table.provenance
    assert back.to_bytes() == table.to_bytes()
    assert len(sha) == 64
    with pytest.raises(ValueError):
        table.matrix[0, 0] = 1.0
    with pytest.raises(ValueError):
        EmbeddingTable.from_bytes(b"EMB0" + table.to_bytes()[4:])
    with pytest.raises(ValueError):
        EmbeddingTable.from_bytes(table.to_bytes() + b"\0")
    with pytest.raises(ValueError):
        EmbeddingTable(["a", "a"], np.zeros((2, 2)), "p")


def test_provenance_check():
    teacher = _small_teacher()
    table = build_lookup([("CCO", parse_smiles("CCO"))], teacher)
    table.check_provenance(teacher.weights_sha256)
    with pytest.raises(ProvenanceMismatch):
        table.check_provenance(_small_teacher(seed=1).weights_sha256)


def test_lookup_counts_one_call_per_reactant():
    teacher = _small_teacher()
    alcohols = ["CCO", "CCCO", "CC(C)O"]
    chlorides = ["CCCl", "CCCCl"]
    entries = [(s, parse_smiles(s)) for s in alcohols + chlorides]
    table = build_lookup(entries, teacher)
    assert teacher.embed_calls == 5 and len(table) == 5 and table.dim == 4
    X = pair_inputs([(a, c) for a in alcohols for c in chlorides], table)
    assert X.shape == (6, 8) and teacher.embed_calls == 5
    again = build_lookup(entries, teacher)
    assert again.to_bytes() == table.to_bytes()
    empty = build_lookup([], teacher)
    assert len(empty) == 0
    with pytest.raises(TeacherUnavailable):
        build_lookup(entries, None)
    with pytest.raises(TeacherUnavailable):
        Teacher(None)


def test_constant_teacher_is_learned():
    rng = nn.make_rng(0, "const")
    X = rng.normal(size=(200, 8))
    Y = np.tile(np.arange(10.0), (200, 1))
    res = train_surrogate(X, Y, SurrogateConfig(epochs=1000, seed=0))
    pred = res.model.infer(X)
    assert np.all(np.mean((pred - Y) ** 2, axis=0) < 1e-4)


def test_training_loss_halves_and_is_deterministic():
    rng = nn.make_rng(1, "distil")
    X = rng.normal(size=(300, 8))
    Y = np.column_stack([np.sin(X[:, k % 8]) + 0.5 * X[:, (k + 1) % 8] for k in range(10)])
    cfg = SurrogateConfig(epochs=60, seed=2)
    a, b = train_surrogate(X, Y, cfg), train_surrogate(X, Y, cfg)
    assert a.history[-1]["loss"] <= 0.5 * a.history[0]["loss"]
    assert [h["loss"] for h in a.history] == [h["loss"] for h in b.history]
    assert set(a.val_r) == set(a.model.tasks)


def test_divergence_on_nonfinite_targets():
    X = np.ones((20, 4))
    Y = np.ones((20, 10))
    Y[3, 0] = np.inf
    from coolscreen.gate import DivergenceDetected

    with pytest.warns(RuntimeWarning), pytest.raises(DivergenceDetected):
        train_surrogate(X, Y, SurrogateConfig(epochs=1, val_fraction=0.0))


def test_save_load(tmp_path, rng):
    m = SurrogateModel(4, seed=5)
    m.set_label_scaling(rng.normal(size=10), np.abs(rng.normal(size=10)) + 0.1)
    m.save(tmp_path / "s.cfw", {"teacher_sha256": "abc"})
    back, hyper = SurrogateModel.load(tmp_path / "s.cfw")
    assert hyper["teacher_sha256"] == "abc"
    x = rng.normal(size=(3, 8))
    assert np.array_equal(back.infer(x), m.infer(x))


def test_fidelity_report(tmp_path, rng):
    T = rng.normal(size=(50, 10))
    rows = fidelity_report(T.copy(), T, path=tmp_path / "f.csv")
    assert all(r["pearson_r"] == pytest.approx(1.0) and r["mae"] == 0.0 for r in rows)
    assert (tmp_path / "f.csv").read_text().splitlines()[0] == "task,pearson_r,mae"
    untrained = SurrogateModel(4).infer(rng.normal(size=(50, 8)))
    rows = fidelity_report(untrained, T)
    assert all(np.isfinite(r["pearson_r"]) and abs(r["pearson_r"]) <= 1 for r in rows)


def test_sample_pairs():
    s = sample_pairs(200, 150, 0.005, 0)
    assert len(s) == 150 and len(set(s)) == 150
    assert all(0 <= i < 200 and 0 <= j < 150 for i, j in s)
    assert s == sample_pairs(200, 150, 0.005, 0)


def test_more_data_never_hurts(demo_world):
    # Nested samples per seed; r measured on one fixed held-out set.
    w = demo_world
    pairs = demo.grid_pairs(w.sets)
    n = len(pairs)
    held = np.sort(nn.make_rng(0, "mono-held").choice(n, 2000, replace=False))
    rest = np.setdiff1d(np.arange(n), held)
    Th = w.teacher.predict([demo.product_of(w.sets, int(k)) for k in held])
    Xh = pair_inputs([pairs[k] for k in held], w.table)
    fractions = (0.001, 0.005, 0.01, 0.05)
    medians = []
    for seed in range(3):
        order = nn.make_rng(seed, "mono").permutation(rest)[:int(0.05 * n)]
        Y = w.teacher.predict([demo.product_of(w.sets, int(k)) for k in order])
        X = pair_inputs([pairs[k] for k in order], w.table)
        row = []
        for f in fractions:
            k = int(round(f * n))
            res = train_surrogate(X[:k], Y[:k], SurrogateConfig(epochs=200, seed=seed))
            row.append(np.median([r["pearson_r"] for r in fidelity_report(res.model.infer(Xh), Th)]))
        medians.append(row)
    across = np.median(np.array(medians), axis=0)
    assert np.all(np.diff(across) >= 0), across
