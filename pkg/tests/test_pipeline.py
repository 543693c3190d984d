import dataclasses
import filecmp
import json
import logging
import shutil

import numpy as np
import pytest

from vulnlearn.archgraph import extract_dependencies, fan_in
from vulnlearn.evaluation import pairing_audit, run_all_hypotheses
from vulnlearn.pipeline import (REPORT_COLUMNS, DatasetManifest, DegeneratePartitionError,
                                EmbeddingParams, ExperimentConfig, ManifestError, ProjectData,
                                cross_project, default_grid, emit_report, load_config,
                                load_manifest, read_report, run_experiment, run_grid,
                                stratified_split)
from vulnlearn.synth import generate_synthetic_corpus


def _manifest_file(tmp_path, lines, files=()):
    for f in files:
        (tmp_path / f).write_text("class X {}\n")
    path = tmp_path / "manifest.csv"
    path.write_text("path,label\n" + "".join(line + "\n" for line in lines))
    return path


# --- manifests ---------------------------------------------------------------

def test_manifest_three_lines(tmp_path):
    path = _manifest_file(tmp_path, ["a.java,1", "b.java,0", "c.java,0"], ["a.java", "b.java", "c.java"])
    m = load_manifest(path)
    assert m.n_files == 3 and m.n_vulnerable == 1
    assert m.entries == [("a.java", 1), ("b.java", 0), ("c.java", 0)]


def test_manifest_bad_label_names_line(tmp_path):
    path = _manifest_file(tmp_path, ["a.java,1", "b.java,2"], ["a.java", "b.java"])
    with pytest.raises(ManifestError, match=r"manifest\.csv:3: label must be 0 or 1"):
        load_manifest(path)


def test_manifest_duplicate_and_missing(tmp_path):
    path = _manifest_file(tmp_path, ["a.java,1", "a.java,0"], ["a.java"])
    with pytest.raises(ManifestError, match="duplicate path"):
        load_manifest(path)
    path = _manifest_file(tmp_path, ["gone.java,1"])
    with pytest.raises(ManifestError, match="file not found"):
        load_manifest(path)


def test_manifest_owasp_shape(tmp_path):
    names = [f"T{i:05d}.java" for i in range(2740)]
    lines = [f"{n},{int(i < 1415)}" for i, n in enumerate(names)]
    m = load_manifest(_manifest_file(tmp_path, lines, names))
    assert (m.n_files, m.n_vulnerable) == (2740, 1415)
    assert round(100 * m.vulnerability_rate) == 52
    assert "(52%)" in m.summary()


def test_manifest_round_trip(tmp_path):
    path = _manifest_file(tmp_path, ["b.java,0", "a.java,1"], ["a.java", "b.java"])
    m = load_manifest(path)
    m.write(tmp_path / "again.csv")
    assert load_manifest(tmp_path / "again.csv").entries == m.entries


# --- synthetic corpora -------------------------------------------------------

def test_synth_counts(corpora):
    m = corpora["token"][0]
    assert m.n_files == 200 and m.n_vulnerable == 80
    assert load_manifest(m.root / "manifest.csv").entries == m.entries


def test_synth_byte_identical(tmp_path, corpora):
    root, _ = generate_synthetic_corpus(tmp_path, seed=1, n_files=200, vuln_rate=0.4, signal="token")
    original = corpora["token"][0].root
    cmp = filecmp.dircmp(root, original)
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for p, _ in corpora["token"][0].entries:
        assert (root / p).read_bytes() == (original / p).read_bytes()


def test_synth_arch_fan_in(corpora):
    m = corpora["arch"]
    G = extract_dependencies(m.root)
    labels = dict(m.entries)
    vuln = [fan_in(G, f) for f in G.nodes if labels[f] == 1]
    clean = [fan_in(G, f) for f in G.nodes if labels[f] == 0]
    assert np.mean(vuln) > np.mean(clean)


def test_synth_rejects_bad_rate(tmp_path):
    with pytest.raises(ValueError):
        generate_synthetic_corpus(tmp_path, vuln_rate=1.0)


# --- configuration -----------------------------------------------------------

def test_config_hash_and_yaml(tmp_path):
    cfg = ExperimentConfig(model="svm", embedding_params=EmbeddingParams(dim=8))
    assert cfg.hash == ExperimentConfig(model="svm", embedding_params=EmbeddingParams(dim=8)).hash
    assert cfg.hash != cfg.replace(seed=1).hash
    (tmp_path / "c.yaml").write_text(cfg.to_yaml())
    assert load_config(tmp_path / "c.yaml") == cfg


def test_config_validation():
    with pytest.raises(ValueError, match="model"):
        ExperimentConfig(model="xgboost")
    with pytest.raises(ValueError, match="unknown configuration keys"):
        ExperimentConfig.from_dict({"colour": "red"})
    with pytest.raises(ValueError):
        ExperimentConfig(train_fraction=0.0)


def test_default_grid_covers_factors():
    grid = default_grid()
    assert len(grid) == 24 and len({c.hash for c in grid}) == 24
    assert sum(c.features == "tokens" for c in grid) == 18


# --- experiments -------------------------------------------------------------

def test_split_is_stratified():
    y = np.array([1] * 40 + [0] * 60)
    tr, te = stratified_split(y, 0.8, seed=0)
    assert y[tr].sum() == 32 and y[te].sum() == 8 and not set(tr) & set(te)
    tr, te = stratified_split(y, 1.0, seed=0)
    assert np.array_equal(tr, te)


def test_bow_forest_beats_arch(corpora):
    m = corpora["token"][0]
    data = ProjectData(m)
    bow = run_experiment(ExperimentConfig(), m, data)
    arch = run_experiment(ExperimentConfig(features="arch"), m, data)
    assert bow.scores.f1 >= 0.9
    assert bow.scores.f1 - arch.scores.f1 >= 0.15


def test_experiment_deterministic(corpora, fast_config):
    m = corpora["token"][1]
    cfg = fast_config.replace(embedding="fasttext", model="resnet")
    a, b = run_experiment(cfg, m), run_experiment(cfg, m)
    assert a.scores == b.scores and a.config_hash == b.config_hash


def test_degenerate_partition(tmp_path):
    for i in range(4):
        (tmp_path / f"F{i}.java").write_text(f"class F{i} {{}}\n")
    m = DatasetManifest("tiny", tmp_path, [("F0.java", 1), ("F1.java", 0), ("F2.java", 0), ("F3.java", 0)])
    with pytest.raises(DegeneratePartitionError, match="split_seed"):
        run_experiment(ExperimentConfig(train_fraction=0.5), m)


def _mutate(root, rel):
    path = root / rel
    path.write_text(path.read_text().replace("public", "public  ") + "\n// unseen words here\nint zzz_new;\n")


def test_no_test_leakage(tmp_path, corpora, fast_config):
    m = corpora["token"][2]
    copy = tmp_path / "copy"
    shutil.copytree(m.root, copy)
    mutated = DatasetManifest(m.project, copy, m.entries)
    labels = np.array([y for _, y in m.entries])
    for emb in ("bow", "word2vec"):
        cfg = fast_config.replace(embedding=emb, model="svm")
        _, test_idx = stratified_split(labels, cfg.train_fraction, cfg.split_seed)
        _, model_a = run_experiment(cfg, m, return_model=True)
        for i in test_idx:
            _mutate(copy, m.entries[i][0])
        _, model_b = run_experiment(cfg, mutated, return_model=True)
        arrays_a, arrays_b = model_a._arrays(), model_b._arrays()
        assert arrays_a.keys() == arrays_b.keys()
        for k in arrays_a:
            assert np.array_equal(arrays_a[k], arrays_b[k]), (emb, k)
        shutil.rmtree(copy)
        shutil.copytree(m.root, copy)


# --- grids -------------------------------------------------------------------

@pytest.fixture(scope="module")
def grid(corpora, fast_config):
    return run_grid(default_grid(fast_config), corpora["token"], workers=1)


def test_grid_shape_and_pairing(grid):
    assert len(grid.rows) == 72 and not grid.failures
    token_rows = [r for r in grid.rows if r.config.features == "tokens"]
    assert len(token_rows) == 54
    assert len([r for r in token_rows if r.project == "synth_token_1"]) == 18
    audit = pairing_audit(grid.table())
    assert all(not v["missing"] and v["pairs"] > 0 for v in audit.values())


def test_grid_rows_ordered(grid):
    keys = [(r.project, r.config_hash) for r in grid.rows]
    assert keys == sorted(keys)


def test_report_feeds_hypotheses(grid, tmp_path):
    emit_report(grid.rows, tmp_path / "r.csv")
    outcomes = run_all_hypotheses(read_report(tmp_path / "r.csv"))
    assert len(outcomes) == 10


def test_grid_failure_isolation(corpora, fast_config):
    m = corpora["token"][0]
    good = fast_config.replace(model="svm")
    # no token survives min_count, so embedding training fails for this cell only
    bad = fast_config.replace(embedding="word2vec",
                              embedding_params=dataclasses.replace(fast_config.embedding_params,
                                                                   min_count=10 ** 9))
    result = run_grid([bad, good], [m])
    assert len(result.failures) == 1 and "ValueError" in result.failures[0].error
    alone = run_experiment(good, m)
    assert result.succeeded[0].scores == alone.scores


def test_grid_parallel_matches_serial(corpora, fast_config):
    configs = [fast_config, fast_config.replace(model="svm")]
    serial = run_grid(configs, corpora["token"][:2], workers=1)
    parallel = run_grid(configs, corpora["token"][:2], workers=2)
    assert serial.table() == parallel.table()


def test_grid_unreadable_project(tmp_path, fast_config):
    m = DatasetManifest("ghost", tmp_path / "missing", [("A.java", 1), ("B.java", 0)])
    result = run_grid([fast_config], [m])
    assert len(result.failures) == 1 and result.failures[0].project == "ghost"


# --- cross-project -----------------------------------------------------------

def test_cross_same_corpus_matches_full_fraction(corpora, fast_config):
    m = corpora["token"][0]
    cfg = fast_config.replace(train_fraction=1.0)
    (row,) = cross_project(m, [m], cfg)
    assert row.scores == run_experiment(cfg, m).scores


def test_cross_shared_and_disjoint(corpora):
    cfg = ExperimentConfig()
    shared = cross_project(corpora["token"][0], corpora["token"][1:], cfg)
    assert all(r.scores.f1 >= 0.8 for r in shared)
    (disjoint,) = cross_project(corpora["token"][0], [corpora["arch"]], cfg)
    baseline = 2 * 0.4 / (1 + 0.4)
    assert abs(disjoint.scores.f1 - baseline) <= 0.1


def test_cross_skips_empty(corpora, fast_config, caplog):
    empty = DatasetManifest("empty", corpora["dir"], [])
    with caplog.at_level(logging.WARNING):
        rows = cross_project(corpora["token"][0], [empty], fast_config)
    assert rows == [] and "empty" in caplog.text


# --- reports -----------------------------------------------------------------

def test_empty_report_is_header_only(tmp_path):
    emit_report([], tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == ",".join(REPORT_COLUMNS) + "\n"


def test_report_round_trip(grid, tmp_path):
    table = grid.table()
    emit_report(grid.rows, tmp_path / "r.csv")
    assert read_report(tmp_path / "r.csv") == table
    emit_report(grid.rows, tmp_path / "r.json")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data == table and list(data[0]) == REPORT_COLUMNS
    assert all(0.0 <= r["z"] <= 1.0 for r in table)


def test_report_unwritable(tmp_path):
    with pytest.raises(OSError, match="cannot write report"):
        emit_report([], tmp_path / "no" / "such" / "dir" / "r.csv")
