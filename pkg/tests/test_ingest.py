import os
import random

import numpy as np
import pytest

from graphclust.graph import build_graph
from graphclust.ingest import (
    DATA_ENV,
    Dataset,
    IngestError,
    convert_tables,
    load_canonical,
    parse_content_format,
    resolve_dataset,
    save_canonical,
    synthetic_dataset,
)


def _write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


def test_two_line_toy(tmp_path):
    c = _write(tmp_path / "toy.content", "p1 1 0 1 A\np2 0 1 1 B\n")
    e = _write(tmp_path / "toy.cites", "p1 p2\n")
    ds = parse_content_format(c, e)
    assert ds.num_nodes == 2 and ds.graph.num_edges == 1
    assert ds.num_features == 3 and ds.num_classes == 2
    assert ds.name == "toy"
    assert ds.features.tolist() == [[1, 0, 1], [0, 1, 1]]


def test_dangling_citations_are_dropped_and_counted(tmp_path):
    c = _write(tmp_path / "x.content", "a 1 A\nb 0 A\nc 1 B\n")
    e = _write(tmp_path / "x.cites", "a b\nb zz\nqq a\nc a\nb a\n")
    ds = parse_content_format(c, e)
    assert ds.meta["dangling"] == "2"
    assert ds.meta["duplicates"] == "1"
    assert sorted((u, v) for u, v, _ in ds.graph.edges) == [(0, 1), (0, 2)]


@pytest.mark.parametrize(
    "content, message",
    [
        ("a 1 0 A\nb 1 B\n", ":2: 1 features, expected 2"),
        ("a 1 A\na 0 B\n", "duplicate node id"),
        ("a x A\n", ":1:"),
        ("a\n", "expected 'id features... class'"),
    ],
)
def test_malformed_content_names_the_line(tmp_path, content, message):
    c = _write(tmp_path / "bad.content", content)
    e = _write(tmp_path / "bad.cites", "")
    with pytest.raises(IngestError, match=message):
        parse_content_format(c, e)


def test_malformed_cites(tmp_path):
    c = _write(tmp_path / "t.content", "a 1 A\nb 0 B\n")
    e = _write(tmp_path / "t.cites", "a b\na b c\n")
    with pytest.raises(IngestError, match="t.cites:2"):
        parse_content_format(c, e)


def test_label_distribution_invariant_under_line_shuffle(tmp_path):
    rng = random.Random(0)
    lines = [f"n{i} {i % 2} {'ABC'[i % 3]}" for i in range(30)]
    cites = "\n".join(f"n{i} n{(i * 7) % 30}" for i in range(30)) + "\n"
    _write(tmp_path / "a.content", "\n".join(lines) + "\n")
    rng.shuffle(lines)
    _write(tmp_path / "b.content", "\n".join(lines) + "\n")
    _write(tmp_path / "c.cites", cites)
    a = parse_content_format(tmp_path / "a.content", tmp_path / "c.cites")
    b = parse_content_format(tmp_path / "b.content", tmp_path / "c.cites")
    assert sorted(np.bincount(a.labels)) == sorted(np.bincount(b.labels))
    assert a.graph.num_edges == b.graph.num_edges


def _triangle_dataset():
    g = build_graph([(0, 1), (1, 2), (0, 2)], 3)
    return Dataset(g, np.array([[1.0, 0.5], [0.0, 2.0], [0.25, 1e-3]]), np.array([0, 1, 1]), "tri", 2)


@pytest.mark.parametrize(
    "ds",
    [
        _triangle_dataset(),
        synthetic_dataset(2, 25, 12, seed=3, name="fifty"),
        Dataset(build_graph([(0, 1)], 3), np.zeros((3, 4)), np.array([0, 0, 1]), "zeros", 2),
    ],
    ids=["triangle", "fifty-nodes", "zero-feature-rows"],
)
def test_canonical_round_trip(tmp_path, ds):
    path = tmp_path / "d.gct"
    save_canonical(ds, path)
    back = load_canonical(path)
    assert back == ds
    assert back.name == ds.name


def test_round_trip_keeps_weights_and_meta(tmp_path):
    g = build_graph([(0, 1, 0.3), (1, 2, 2.0)], 3)
    ds = Dataset(g, np.eye(3), np.array([0, 1, 0]), "w", 2, {"provenance": "hand made"})
    save_canonical(ds, tmp_path / "w.gct")
    back = load_canonical(tmp_path / "w.gct")
    assert back.graph.edges == g.edges
    assert back.meta["provenance"] == "hand made"


def test_empty_dataset_rejected(tmp_path):
    p = _write(tmp_path / "e.gct", "GCT1 0 0 0 0\n\n")
    with pytest.raises(IngestError, match="empty dataset"):
        load_canonical(p)


@pytest.mark.parametrize(
    "text, message",
    [
        ("GCT2 1 0 1 1\n1\n0\n", "unsupported format version"),
        ("GCT1 2 0 1 1\n1\n0 0\n", "expected 3 body lines"),
        ("GCT1 1 0 2 1\n1\n0\n", "node 0 has 1 features"),
        ("GCT1 2 1 1 1\n1\n2\n0 0\n0 1\n", "edge line 0"),
        ("GCT1 2 1 1 1\n1\n2\n0 0\n0 0 1\n", "header says 1 edges"),
    ],
)
def test_canonical_errors(tmp_path, text, message):
    p = _write(tmp_path / "bad.gct", text)
    with pytest.raises(IngestError, match=message):
        load_canonical(p)


def test_dataset_invariants():
    g = build_graph([(0, 1)], 2)
    with pytest.raises(IngestError, match="feature rows"):
        Dataset(g, np.zeros((3, 1)), np.array([0, 0]), "x", 1)
    with pytest.raises(IngestError, match="class ids"):
        Dataset(g, np.zeros((2, 1)), np.array([0, 2]), "x", 2)


def test_convert_tables(tmp_path):
    e = _write(tmp_path / "edges.tsv", "src\tdst\na\tb\nb\tc\nc\tghost\n")
    f = _write(tmp_path / "feat.csv", "id,x,y\na,1,0\nb,0,1\nc,1,1\n")
    lab = _write(tmp_path / "lab.csv", "id,label\nc,2\na,1\nb,1\n")
    ds = convert_tables(e, f, lab, "uat-mini", header=True)
    assert ds.num_nodes == 3 and ds.graph.num_edges == 2
    assert ds.labels.tolist() == [1, 1, 0]
    assert ds.meta["dangling"] == "1"
    assert "edges.tsv" in ds.meta["provenance"]
    save_canonical(ds, tmp_path / "u.gct")
    text = (tmp_path / "u.gct").read_text()
    assert text.startswith("# name: uat-mini\n# provenance: converted from edges.tsv (")
    assert load_canonical(tmp_path / "u.gct") == ds


def test_convert_missing_label(tmp_path):
    e = _write(tmp_path / "e.tsv", "a\tb\n")
    f = _write(tmp_path / "f.csv", "a,1\nb,2\n")
    lab = _write(tmp_path / "l.csv", "a,x\n")
    with pytest.raises(IngestError, match="no label for node 'b'"):
        convert_tables(e, f, lab, "m")


def test_resolve_dataset_paths(tmp_path, monkeypatch):
    ds = _triangle_dataset()
    save_canonical(ds, tmp_path / "tri.gct")
    assert resolve_dataset(str(tmp_path / "tri.gct")) == ds
    monkeypatch.setenv(DATA_ENV, str(tmp_path))
    assert resolve_dataset("tri") == ds
    (tmp_path / "toy").mkdir()
    _write(tmp_path / "toy" / "toy.content", "a 1 A\nb 0 B\n")
    _write(tmp_path / "toy" / "toy.cites", "a b\n")
    assert resolve_dataset("toy").num_nodes == 2
    with pytest.raises(IngestError, match="not found"):
        resolve_dataset("nothing")
    with pytest.raises(IngestError, match="does not exist"):
        resolve_dataset(str(tmp_path / "missing.gct"))


def test_resolve_without_data_dir(monkeypatch):
    monkeypatch.delenv(DATA_ENV, raising=False)
    with pytest.raises(IngestError, match=DATA_ENV):
        resolve_dataset("cora")


def test_synthetic_dataset_has_no_isolated_nodes_and_is_deterministic():
    a = synthetic_dataset(4, 30, 20, p_in=0.02, p_out=0.0, seed=5)
    assert a.graph.degrees.min() >= 1
    assert a == synthetic_dataset(4, 30, 20, p_in=0.02, p_out=0.0, seed=5)
    assert resolve_dataset("planted-small").num_nodes == 60


# --- real datasets, available only when GRAPHCLUST_DATA points at them

def _maybe(name):
    if not os.environ.get(DATA_ENV):
        pytest.skip(f"{DATA_ENV} not set")
    try:
        return resolve_dataset(name)
    except IngestError as exc:
        pytest.skip(str(exc))


def test_cora_shape():
    ds = _maybe("cora")
    assert (ds.num_nodes, ds.num_features, ds.num_classes) == (2708, 1433, 7)
    assert abs(ds.graph.num_edges - 5429) <= 0.01 * 5429


def test_citeseer_shape():
    ds = _maybe("citeseer")
    assert (ds.num_nodes, ds.num_classes) == (3312, 6)
    # the published files carry 3703 word features
    assert ds.num_features == 3703


def test_uat_shape():
    ds = _maybe("uat")
    assert (ds.num_nodes, ds.num_features, ds.num_classes) == (1190, 239, 4)
