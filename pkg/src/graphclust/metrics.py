"""Supervised (ACC, NMI, ARI) and unsupervised (modularity, cut, conductance,
internal density) clustering evaluations, and the per-run report record."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from graphclust.graph import Graph, Partition
from graphclust.numerics import linear_assignment

__all__ = [
    "ContingencyTable",
    "DegenerateMetric",
    "MetricsReport",
    "REPORT_COLUMNS",
    "accuracy_matched",
    "ari",
    "conductance",
    "cut",
    "evaluate",
    "internal_density",
    "modularity",
    "nmi",
    "volume",
]

REPORT_COLUMNS = (
    "algorithm", "dataset", "seed", "acc", "acc_maj", "nmi", "ari",
    "modularity", "conductance_mean", "internal_density", "wall_ms",
)


class DegenerateMetric(UserWarning):
    """A metric hit an undefined case and fell back to its documented value."""


def _labels(x) -> np.ndarray:
    if isinstance(x, Partition):
        return x.assignment
    return np.asarray(x).ravel()


@dataclass(frozen=True)
class ContingencyTable:
    """Class-by-cluster co-occurrence counts ``n_ij``."""

    counts: np.ndarray

    @classmethod
    def of(cls, y, yhat) -> "ContingencyTable":
        y, yhat = _labels(y), _labels(yhat)
        if len(y) != len(yhat):
            raise ValueError(f"label vectors differ in length ({len(y)} vs {len(yhat)})")
        _, yi = np.unique(y, return_inverse=True)
        _, hi = np.unique(yhat, return_inverse=True)
        counts = np.zeros((yi.max(initial=-1) + 1, hi.max(initial=-1) + 1), dtype=np.int64)
        np.add.at(counts, (yi.ravel(), hi.ravel()), 1)
        return cls(counts)

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def accuracy_matched(y, yhat, mode: str = "assignment") -> float:
    """Clustering accuracy under the best label mapping.

    ``assignment`` maps clusters to classes one-to-one (Kuhn-Munkres on the
    zero-padded contingency table); ``majority`` sends each cluster to its
    most frequent class.
    """
    table = ContingencyTable.of(y, yhat)
    n = table.total
    if n == 0:
        raise ValueError("accuracy of an empty labelling")
    if mode == "assignment":
        cols = linear_assignment(table.counts, maximize=True)
        rows = np.arange(table.counts.shape[0])
        valid = cols < table.counts.shape[1]
        return float(table.counts[rows[valid], cols[valid]].sum()) / n
    if mode == "majority":
        return float(table.counts.max(axis=0).sum()) / n
    raise ValueError(f"unknown accuracy mode {mode!r}")


def _entropy(counts: np.ndarray, n: int) -> float:
    p = counts[counts > 0] / n
    return float(-(p * np.log(p)).sum())


def nmi(y, yhat) -> float:
    """Mutual information normalized by the geometric mean of entropies."""
    table = ContingencyTable.of(y, yhat)
    n = table.total
    if n == 0:
        raise ValueError("NMI of an empty labelling")
    hy, hc = _entropy(table.row_sums, n), _entropy(table.col_sums, n)
    if hy == 0.0 or hc == 0.0:
        warnings.warn("NMI undefined for a single-cluster labelling; reported as 0", DegenerateMetric, stacklevel=2)
        return 0.0
    nz = table.counts > 0
    pij = table.counts[nz] / n
    pi = np.broadcast_to(table.row_sums[:, None], table.counts.shape)[nz] / n
    pj = np.broadcast_to(table.col_sums[None, :], table.counts.shape)[nz] / n
    mi = float((pij * np.log(pij / (pi * pj))).sum())
    return min(1.0, max(0.0, mi / math.sqrt(hy * hc)))


def _comb2(x: np.ndarray) -> float:
    x = x.astype(np.float64)
    return float((x * (x - 1.0) / 2.0).sum())


def ari(y, yhat) -> float:
    """Adjusted Rand index from pair counts of the contingency table."""
    table = ContingencyTable.of(y, yhat)
    n = table.total
    if n < 2:
        raise ValueError("ARI needs at least two items")
    a, b, c = _comb2(table.row_sums), _comb2(table.col_sums), _comb2(table.counts)
    expected = a * b / (n * (n - 1) / 2.0)
    denom = 0.5 * (a + b) - expected
    if denom == 0.0:
        warnings.warn("ARI undefined (max index equals expected index); reported as 0", DegenerateMetric, stacklevel=2)
        return 0.0
    return (c - expected) / denom


def _cluster_edge_stats(g: Graph, labels: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-cluster internal edge weight, internal edge count and volume."""
    e = g.edge_array()
    w = np.array([wt for _, _, wt in g.edges], dtype=np.float64)
    internal_w = np.zeros(k)
    internal_m = np.zeros(k)
    if len(e):
        same = labels[e[:, 0]] == labels[e[:, 1]]
        internal_w = np.bincount(labels[e[same, 0]], weights=w[same], minlength=k)
        internal_m = np.bincount(labels[e[same, 0]], minlength=k).astype(np.float64)
    vol = np.bincount(labels, weights=g.strengths, minlength=k)
    return internal_w, internal_m, vol


def modularity(g: Graph, p) -> float:
    """Newman modularity, summed clusterwise: ``sum_C e_C/m - (vol_C/2m)^2``."""
    labels = _labels(p)
    if len(labels) != g.num_nodes:
        raise ValueError("partition size does not match the graph")
    m = g.total_weight
    if m <= 0:
        raise ValueError("modularity is undefined on an edgeless graph")
    k = int(labels.max()) + 1 if len(labels) else 0
    internal_w, _, vol = _cluster_edge_stats(g, labels, k)
    return float((internal_w / m - (vol / (2.0 * m)) ** 2).sum())


def _as_mask(g: Graph, cluster: Iterable[int]) -> np.ndarray:
    mask = np.zeros(g.num_nodes, dtype=bool)
    idx = np.asarray(list(cluster) if not isinstance(cluster, np.ndarray) else cluster, dtype=np.int64)
    mask[idx] = True
    count = int(mask.sum())
    if count == 0 or count == g.num_nodes:
        raise ValueError("cluster must be a non-empty proper subset of the nodes")
    return mask


def cut(g: Graph, cluster: Iterable[int]) -> float:
    """Total weight of edges leaving the cluster."""
    mask = _as_mask(g, cluster)
    return float(sum(w for u, v, w in g.edges if mask[u] != mask[v]))


def volume(g: Graph, cluster: Iterable[int]) -> float:
    """Sum of (weighted) degrees over the cluster."""
    mask = _as_mask(g, cluster)
    return float(g.strengths[mask].sum())


def conductance(g: Graph, cluster: Iterable[int]) -> float:
    """``cut(A) / min(vol(A), vol(V \\ A))``."""
    mask = _as_mask(g, cluster)
    strengths = g.strengths
    denom = min(float(strengths[mask].sum()), float(strengths[~mask].sum()))
    c = float(sum(w for u, v, w in g.edges if mask[u] != mask[v]))
    if denom == 0.0:
        warnings.warn("conductance of a zero-volume side is undefined; reported as 0", DegenerateMetric, stacklevel=2)
        return 0.0
    return c / denom


def conductance_mean(g: Graph, p) -> float:
    """Mean conductance over every cluster that is a proper subset of V."""
    labels = _labels(p)
    k = int(labels.max()) + 1 if len(labels) else 0
    _, _, vol = _cluster_edge_stats(g, labels, k)
    e = g.edge_array()
    w = np.array([wt for _, _, wt in g.edges], dtype=np.float64)
    cuts = np.zeros(k)
    if len(e):
        cross = labels[e[:, 0]] != labels[e[:, 1]]
        cuts += np.bincount(labels[e[cross, 0]], weights=w[cross], minlength=k)
        cuts += np.bincount(labels[e[cross, 1]], weights=w[cross], minlength=k)
    sizes = np.bincount(labels, minlength=k)
    total = vol.sum()
    values = []
    for c in np.flatnonzero((sizes > 0) & (sizes < len(labels))):
        denom = min(vol[c], total - vol[c])
        values.append(cuts[c] / denom if denom > 0 else 0.0)
    return float(np.mean(values)) if values else float("nan")


def internal_density(g: Graph, p) -> float:
    """Node-weighted average of ``m_C / C(n_C, 2)`` over clusters."""
    labels = _labels(p)
    k = int(labels.max()) + 1 if len(labels) else 0
    _, internal_m, _ = _cluster_edge_stats(g, labels, k)
    sizes = np.bincount(labels, minlength=k).astype(np.float64)
    if np.any((sizes > 0) & (sizes < 2)):
        warnings.warn("singleton clusters have no internal density; counted as 0", DegenerateMetric, stacklevel=2)
    rho = np.zeros(k)
    big = sizes >= 2
    rho[big] = internal_m[big] / (sizes[big] * (sizes[big] - 1) / 2.0)
    return float((sizes * rho).sum() / sizes.sum())


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return repr(round(v, 12))
    return str(v)


@dataclass
class MetricsReport:
    """Metric values for one (algorithm, dataset, seed) run."""

    algorithm: str
    dataset: str
    seed: int
    entries: dict[str, float] = field(default_factory=dict)
    wall_ms: float | None = None
    flags: list[str] = field(default_factory=list)
    status: str = "ok"
    extra: dict[str, object] = field(default_factory=dict)

    def row(self) -> dict[str, object]:
        out: dict[str, object] = {"algorithm": self.algorithm, "dataset": self.dataset, "seed": self.seed}
        for name in REPORT_COLUMNS[3:-1]:
            out[name] = self.entries.get(name, float("nan"))
        out["wall_ms"] = None if self.wall_ms is None else round(self.wall_ms, 3)
        return out

    def to_csv_row(self) -> str:
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerow([_fmt(v) for v in self.row().values()])
        return buf.getvalue()

    @staticmethod
    def csv_header() -> str:
        return ",".join(REPORT_COLUMNS) + "\n"

    def to_json(self) -> str:
        row = self.row()
        clean = {
            k: (None if isinstance(v, float) and math.isnan(v) else (round(v, 12) if isinstance(v, float) else v))
            for k, v in row.items()
        }
        clean["status"] = self.status
        clean["flags"] = sorted(set(self.flags))
        clean["extra"] = self.extra
        return json.dumps(clean, sort_keys=False)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        obj = json.loads(text)
        entries = {
            name: (float("nan") if obj.get(name) is None else float(obj[name]))
            for name in REPORT_COLUMNS[3:-1]
        }
        return cls(
            algorithm=obj["algorithm"],
            dataset=obj["dataset"],
            seed=int(obj["seed"]),
            entries=entries,
            wall_ms=obj.get("wall_ms"),
            flags=list(obj.get("flags", [])),
            status=obj.get("status", "ok"),
            extra=dict(obj.get("extra", {})),
        )


def validate_csv_row(line: str) -> dict[str, str]:
    """Parse one report CSV row against the fixed column schema."""
    fields = next(csv.reader([line]))
    if len(fields) != len(REPORT_COLUMNS):
        raise ValueError(f"expected {len(REPORT_COLUMNS)} columns, got {len(fields)}")
    row = dict(zip(REPORT_COLUMNS, fields))
    int(row["seed"])
    for name in REPORT_COLUMNS[3:]:
        if row[name] != "":
            float(row[name])
    return row


def evaluate(
    g: Graph,
    labels: Sequence[int] | None,
    p: Partition,
    algorithm: str,
    dataset: str,
    seed: int,
) -> MetricsReport:
    """Run the whole metric suite for one clustering; degenerate cases become flags."""
    report = MetricsReport(algorithm, dataset, seed)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateMetric)
        if labels is not None:
            report.entries["acc"] = accuracy_matched(labels, p, "assignment")
            report.entries["acc_maj"] = accuracy_matched(labels, p, "majority")
            report.entries["nmi"] = nmi(labels, p)
            report.entries["ari"] = ari(labels, p)
        report.entries["modularity"] = modularity(g, p) if g.num_edges else float("nan")
        report.entries["conductance_mean"] = conductance_mean(g, p)
        report.entries["internal_density"] = internal_density(g, p)
    report.flags.extend(str(w.message) for w in caught if issubclass(w.category, DegenerateMetric))
    return report
