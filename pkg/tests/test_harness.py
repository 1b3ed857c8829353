import re
import warnings

import numpy as np
import pytest

from mvmanifold.dataset import MultiViewDataset, SyntheticScenario, generate_synthetic
from mvmanifold.errors import ConfigurationError
from mvmanifold.harness import (METHODS, SweepSpec, cell_seeds, embed, emit_embedding, emit_scatter,
                                full_prediction, load_embedding, prepare, run_sweep, view_ablation)
from mvmanifold.pretrain import PretrainConfig
from mvmanifold.sne import Embedding


@pytest.fixture(scope="module")
def small():
    rng = np.random.default_rng(0)
    labels = np.repeat([0, 1, 2], 15)
    centers = rng.normal(size=(3, 4)) * 6
    views = [centers[labels] + rng.normal(size=(45, 4)) for _ in range(2)]
    return MultiViewDataset(views, labels)


@pytest.mark.parametrize("method", METHODS)
def test_every_method_embeds(small, method):
    emb = embed(small, method, 8, n_iter=60)
    assert emb.coords.shape[1] == 2 and np.all(np.isfinite(emb.coords))


def test_prepare_rules(small):
    assert prepare(small, "tsne-concat", PretrainConfig("none")).dims == [8]
    assert prepare(small, "lle").n_views == 1
    assert prepare(small, "multille").dims == [4, 4]
    assert prepare(small, "multisne").dims[0] <= 4
    with pytest.raises(ConfigurationError):
        prepare(small, "tsne", PretrainConfig("multicca"))
    with pytest.raises(ConfigurationError):
        embed(small, "nope", 5)


def test_parameter_validation(small):
    with pytest.raises(ConfigurationError):
        embed(small, "multisne", 44)
    with pytest.raises(ConfigurationError):
        embed(small, "multille", 2.5)
    with pytest.raises(ConfigurationError):
        embed(small, "multille", 5, weights="auto")
    with pytest.raises(ConfigurationError):
        SweepSpec("multisne", grid=(5, 50)).validate_for(small)


def test_single_cell_sweep(small):
    rep = run_sweep(small, SweepSpec("multille", grid=(8,), repeats=1))
    assert len(rep.rows) == 1 and rep.optimum == 8
    row = rep.rows[0]
    assert row["status"] == "ok" and row["wall_time"] > 0
    assert row["nmi"] == pytest.approx(1.0)


def test_sweep_rows_and_optimum(small):
    spec = SweepSpec("multisne", grid=(2, 10), repeats=2, n_iter=150, seed=4)
    rep = run_sweep(small, spec)
    assert len(rep.rows) == 4
    assert all(np.isfinite(r["wall_time"]) and r["wall_time"] > 0 for r in rep.rows)
    means = {r["parameter"]: r["nmi"] for r in rep.summary()}
    assert means[rep.optimum] == max(means.values())
    again = run_sweep(small, spec)
    assert [r["nmi"] for r in again.rows] == [r["nmi"] for r in rep.rows]
    assert again.optimum == rep.optimum


def test_parallel_matches_serial(small):
    spec = SweepSpec("multisne", grid=(5, 10), repeats=1, n_iter=100, seed=2)
    a = run_sweep(small, spec)
    b = run_sweep(small, SweepSpec("multisne", grid=(5, 10), repeats=1, n_iter=100, seed=2, workers=2))
    assert [r["acc"] for r in a.rows] == [r["acc"] for r in b.rows]


def test_cell_seeds_distinct():
    seeds = {cell_seeds(0, c) for c in range(50)}
    assert len(seeds) == 50
    assert cell_seeds(3, 7) == cell_seeds(3, 7)


def test_failures_become_rows():
    rng = np.random.default_rng(1)
    X = np.vstack([rng.normal(size=(10, 2)), rng.normal(size=(10, 2)) + 1000])
    Y = np.vstack([rng.normal(size=(10, 2)) + 1000, rng.normal(size=(10, 2))])
    Y[:5] += 5000
    ds = MultiViewDataset([X, Y], np.repeat([0, 1], 10))
    rep = run_sweep(ds, SweepSpec("misomap", grid=(1, 12), repeats=1))
    statuses = [r["status"] for r in rep.rows]
    assert statuses[0].startswith("failed") and statuses[1] == "ok"
    assert rep.optimum == 12


def test_dropped_samples_count_against_score():
    emb = Embedding(np.zeros((3, 2)), "isomap", index=np.array([0, 2, 3]))
    np.testing.assert_array_equal(full_prediction(emb, [1, 1, 0], 5), [1, -1, 1, 0, -1])


def test_dbscan_sweep(small):
    rep = run_sweep(small, SweepSpec("multille", grid=(8,), cluster="dbscan", min_pts=3))
    assert rep.rows[0]["status"] == "ok"


def test_view_ablation_counts(small):
    rows = view_ablation(small, "multille", 8)
    assert [r["views"] for r in rows] == [(0,), (1,), (0, 1)]
    ds3 = MultiViewDataset(small.views + [small.views[0]], small.labels)
    assert len(view_ablation(ds3, "multille", 8)) == 7
    with pytest.raises(ConfigurationError):
        view_ablation(small.select_views([0]), "multille", 8)


def test_embedding_csv_round_trip(tmp_path, rng):
    Y = rng.normal(size=(12, 2)) * 1e3
    labels = np.repeat([0, 1, 2], 4)
    path = emit_embedding(Embedding(Y, "x"), tmp_path / "e.csv", labels)
    back, lab = load_embedding(path)
    assert np.abs(back - Y).max() <= 1e-12
    assert lab.tolist() == [str(v) for v in labels]


def test_scatter_groups(tmp_path, rng):
    Y = rng.normal(size=(30, 2))
    path = emit_scatter(Y, tmp_path / "s.svg", labels=np.repeat(["a", "b", "c"], 10))
    svg = path.read_text()
    assert svg.startswith("<svg") and svg.count('class="group"') == 3
    fills = set(re.findall(r'class="group" data-label="[^"]+" fill="(#[0-9a-f]{6})"', svg))
    assert len(fills) == 3
    assert svg.count("<circle") == 30 + 3


def test_scatter_projects_3d(tmp_path, rng):
    with pytest.warns(RuntimeWarning):
        emit_scatter(rng.normal(size=(10, 3)), tmp_path / "s.svg")


def test_scatter_palette_cycles(tmp_path, rng):
    svg = emit_scatter(rng.normal(size=(24, 2)), tmp_path / "s.svg", labels=np.arange(24) % 12).read_text()
    assert svg.count('class="group"') == 12


def test_scatter_unwritable(rng):
    with pytest.raises(OSError):
        emit_scatter(rng.normal(size=(5, 2)), "/nonexistent-dir/x/s.svg")
