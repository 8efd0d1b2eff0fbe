"""Dataset loading: ``.content``/``.cites`` citation files, the canonical
``GCT1`` text format, and a converter for loose TSV/CSV sources."""

from __future__ import annotations

import csv
import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from graphclust.graph import Graph, build_graph

__all__ = [
    "BUNDLED",
    "DATA_ENV",
    "Dataset",
    "IngestError",
    "convert_tables",
    "load_canonical",
    "parse_content_format",
    "resolve_dataset",
    "save_canonical",
    "synthetic_dataset",
]

FORMAT_TAG = "GCT1"
DATA_ENV = "GRAPHCLUST_DATA"
BUNDLED = ("cora", "citeseer", "uat")
# generated on demand, no files needed: name -> (blocks, block size, features)
SYNTHETIC = {"planted": (7, 100, 300), "planted-small": (3, 20, 30)}


class IngestError(ValueError):
    """Malformed or inconsistent dataset input."""


@dataclass(frozen=True, eq=False)
class Dataset:
    graph: Graph
    features: np.ndarray
    labels: np.ndarray
    name: str
    num_classes: int
    meta: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = self.graph.num_nodes
        if self.features.shape[0] != n:
            raise IngestError(f"{self.features.shape[0]} feature rows for {n} nodes")
        if len(self.labels) != n:
            raise IngestError(f"{len(self.labels)} labels for {n} nodes")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise IngestError(f"class ids must lie in [0, {self.num_classes})")

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.name == other.name
            and self.num_classes == other.num_classes
            and self.graph.num_nodes == other.graph.num_nodes
            and self.graph.edges == other.graph.edges
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.labels, other.labels)
        )

    __hash__ = None  # type: ignore[assignment]


def parse_content_format(content_path: str | os.PathLike, cites_path: str | os.PathLike, name: str | None = None) -> Dataset:
    """Read a ``.content`` file (``id f_1 .. f_d class``) and a ``.cites`` file.

    Ids are remapped to ``[0, n)`` in file order, classes in first-appearance
    order. Citation direction is discarded. Citations naming an id absent
    from the content file are dropped and counted in ``meta['dangling']``.
    """
    content_path, cites_path = Path(content_path), Path(cites_path)
    ids: dict[str, int] = {}
    classes: dict[str, int] = {}
    rows: list[list[float]] = []
    labels: list[int] = []
    d = None
    with content_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 2:
                raise IngestError(f"{content_path}:{lineno}: expected 'id features... class'")
            if d is None:
                d = len(parts) - 2
            elif len(parts) - 2 != d:
                raise IngestError(
                    f"{content_path}:{lineno}: {len(parts) - 2} features, expected {d}"
                )
            if parts[0] in ids:
                raise IngestError(f"{content_path}:{lineno}: duplicate node id {parts[0]!r}")
            try:
                rows.append([float(x) for x in parts[1:-1]])
            except ValueError as exc:
                raise IngestError(f"{content_path}:{lineno}: {exc}") from None
            ids[parts[0]] = len(ids)
            labels.append(classes.setdefault(parts[-1], len(classes)))
    n = len(ids)
    if n == 0:
        raise IngestError("empty dataset")

    edges: list[tuple[int, int]] = []
    dangling = 0
    with cites_path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise IngestError(f"{cites_path}:{lineno}: expected two ids, got {len(parts)} fields")
            a, b = ids.get(parts[0]), ids.get(parts[1])
            if a is None or b is None:
                dangling += 1
                continue
            edges.append((a, b))
    g = build_graph(edges, n)
    meta = {
        "source": f"{content_path.name} + {cites_path.name}",
        "dangling": str(dangling),
        "duplicates": str(g.duplicate_count),
        "self_loops": str(g.self_loop_count),
        "classes": " ".join(classes),
    }
    return Dataset(
        graph=g,
        features=np.array(rows, dtype=np.float64).reshape(n, d or 0),
        labels=np.array(labels, dtype=np.int64),
        name=name or content_path.stem,
        num_classes=len(classes),
        meta=meta,
    )


def _fmt(x: float) -> str:
    return str(int(x)) if float(x).is_integer() and abs(x) < 1e15 else repr(float(x))


def save_canonical(ds: Dataset, path: str | os.PathLike) -> None:
    n, d = ds.features.shape
    g = ds.graph
    lines = [f"# name: {ds.name}"]
    lines += [f"# {k}: {v}" for k, v in ds.meta.items() if k != "name"]
    lines.append(f"{FORMAT_TAG} {n} {g.num_edges} {d} {ds.num_classes}")
    lines += [" ".join(_fmt(x) for x in row) for row in ds.features]
    lines.append(" ".join(str(int(c)) for c in ds.labels))
    lines += [f"{u} {v} {_fmt(w)}" for u, v, w in g.edges]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_canonical(path: str | os.PathLike) -> Dataset:
    path = Path(path)
    meta: dict[str, str] = {}
    with path.open(encoding="utf-8") as fh:
        lines = fh.read().split("\n")
    pos = 0
    while pos < len(lines) and lines[pos].startswith("#"):
        key, _, value = lines[pos][1:].partition(":")
        meta[key.strip()] = value.strip()
        pos += 1
    if pos >= len(lines):
        raise IngestError(f"{path}: missing header")
    header = lines[pos].split()
    if not header or header[0] != FORMAT_TAG:
        raise IngestError(f"{path}: unsupported format version {header[0] if header else '<blank>'!r}, expected {FORMAT_TAG}")
    if len(header) != 5:
        raise IngestError(f"{path}: header needs 'GCT1 n m d k'")
    n, m, d, k = (int(x) for x in header[1:])
    if n == 0:
        raise IngestError("empty dataset")
    pos += 1
    body = lines[pos:]
    if body and body[-1] == "":
        body = body[:-1]
    if len(body) != n + 1 + m:
        raise IngestError(f"{path}: expected {n + 1 + m} body lines after the header, found {len(body)}")
    features = np.zeros((n, d))
    for i in range(n):
        parts = body[i].split()
        if len(parts) != d:
            raise IngestError(f"{path}: node {i} has {len(parts)} features, header says {d}")
        features[i] = [float(x) for x in parts]
    labels = np.array([int(x) for x in body[n].split()], dtype=np.int64)
    if len(labels) != n:
        raise IngestError(f"{path}: label line has {len(labels)} entries, header says {n}")
    edges = []
    for j, line in enumerate(body[n + 1 :]):
        parts = line.split()
        if len(parts) != 3:
            raise IngestError(f"{path}: edge line {j} must be 'u v w'")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    g = build_graph(edges, n)
    if g.num_edges != m:
        raise IngestError(f"{path}: header says {m} edges, file has {g.num_edges} distinct edges")
    name = meta.pop("name", path.stem)
    return Dataset(g, features, labels, name, k, meta)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:16]


def _read_rows(path: Path, delimiter: str, header: bool) -> list[list[str]]:
    with path.open(encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r and any(c.strip() for c in r)]
    return rows[1:] if header else rows


def convert_tables(
    edges_tsv: str | os.PathLike,
    features_csv: str | os.PathLike,
    labels_csv: str | os.PathLike,
    name: str,
    header: bool = False,
) -> Dataset:
    """Assemble a dataset from an edge TSV (``u<TAB>v``), a feature CSV
    (``node_id,f_1,..,f_d``) and a label CSV (``node_id,label``).

    Node order follows the feature file; ``header`` skips the first row of
    every table. Provenance (file names and content hashes)
    is stored in ``meta`` and written as header comments on save.
    """
    edges_tsv, features_csv, labels_csv = Path(edges_tsv), Path(features_csv), Path(labels_csv)
    frows = _read_rows(features_csv, ",", header)
    if not frows:
        raise IngestError("empty dataset")
    ids = {r[0].strip(): i for i, r in enumerate(frows)}
    d = len(frows[0]) - 1
    feats = np.zeros((len(frows), d))
    for i, r in enumerate(frows):
        if len(r) - 1 != d:
            raise IngestError(f"{features_csv}: row {i} has {len(r) - 1} features, expected {d}")
        feats[i] = [float(x) for x in r[1:]]
    classes: dict[str, int] = {}
    labels = np.full(len(ids), -1, dtype=np.int64)
    for r in _read_rows(labels_csv, ",", header):
        if r[0].strip() in ids:
            labels[ids[r[0].strip()]] = classes.setdefault(r[1].strip(), len(classes))
    missing = np.flatnonzero(labels < 0)
    if missing.size:
        raise IngestError(f"{labels_csv}: no label for node {frows[int(missing[0])][0]!r}")
    edges, dangling = [], 0
    for r in _read_rows(edges_tsv, "\t", header):
        a, b = ids.get(r[0].strip()), ids.get(r[1].strip())
        if a is None or b is None:
            dangling += 1
        else:
            edges.append((a, b))
    g = build_graph(edges, len(ids))
    meta = {
        "provenance": (
            f"converted from {edges_tsv.name} ({_sha256(edges_tsv)}), "
            f"{features_csv.name} ({_sha256(features_csv)}), {labels_csv.name} ({_sha256(labels_csv)})"
        ),
        "dangling": str(dangling),
        "duplicates": str(g.duplicate_count),
        "self_loops": str(g.self_loop_count),
    }
    return Dataset(g, feats, labels, name, len(classes), meta)


def synthetic_dataset(
    blocks: int = 7,
    block_size: int = 100,
    num_features: int = 300,
    p_in: float = 0.06,
    p_out: float = 0.004,
    seed: int = 0,
    name: str = "planted",
) -> Dataset:
    """Planted-partition graph with class-correlated binary features.

    Each class owns a slice of the feature columns that its nodes switch on
    with elevated probability. A node left without edges is linked to a
    random member of its own block, so there are no isolated nodes.
    """
    rng = np.random.default_rng(seed)
    n = blocks * block_size
    labels = np.repeat(np.arange(blocks), block_size)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(len(iu)) < prob
    edges = list(zip(iu[keep].tolist(), ju[keep].tolist()))
    deg = np.bincount(np.concatenate([iu[keep], ju[keep]]), minlength=n)
    for v in np.flatnonzero(deg == 0):
        mates = np.flatnonzero(labels == labels[v])
        u = int(rng.choice(mates[mates != v]))
        edges.append((min(u, int(v)), max(u, int(v))))
    feats = (rng.random((n, num_features)) < 0.02).astype(np.float64)
    width = max(1, num_features // blocks)
    for c in range(blocks):
        rows = np.flatnonzero(labels == c)
        cols = slice(c * width, min((c + 1) * width, num_features))
        block = rng.random((len(rows), cols.stop - cols.start)) < 0.15
        feats[rows, cols] = np.maximum(feats[rows, cols], block)
    meta = {"source": "synthetic", "seed": str(seed), "p_in": repr(p_in), "p_out": repr(p_out)}
    return Dataset(build_graph(edges, n), feats, labels, name, blocks, meta)


def data_dir() -> Path | None:
    root = os.environ.get(DATA_ENV)
    return Path(root) if root else None


def resolve_dataset(spec: str) -> Dataset:
    """Load a dataset by bundled name (looked up under ``$GRAPHCLUST_DATA``)
    or by path to a canonical file.

    A bundled name ``x`` resolves to ``x.gct`` or to ``x/x.content`` plus
    ``x/x.cites`` inside the data directory. The names in ``SYNTHETIC``
    are generated in memory (seed 0).
    """
    if spec.lower() in SYNTHETIC:
        b, size, d = SYNTHETIC[spec.lower()]
        return synthetic_dataset(b, size, d, name=spec.lower())
    path = Path(spec)
    if path.suffix or path.exists():
        if not path.exists():
            raise IngestError(f"dataset file {spec!r} does not exist")
        return load_canonical(path)
    name = spec.lower()
    root = data_dir()
    if root is None:
        raise IngestError(f"dataset {spec!r}: set {DATA_ENV} to the directory holding the dataset files")
    for cand in (root / f"{name}.gct", root / name / f"{name}.gct"):
        if cand.exists():
            return load_canonical(cand)
    for base in (root / name, root):
        content, cites = base / f"{name}.content", base / f"{name}.cites"
        if content.exists() and cites.exists():
            return parse_content_format(content, cites, name=name)
    raise IngestError(f"dataset {spec!r} not found under {root}")
