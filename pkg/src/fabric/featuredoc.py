"""Feature documentation generated from the corpus itself.

For every (otype, key) pair that actually occurs, a frequency table of the
values, rendered both machine-readable (JSON) and human-readable (text),
plus an index tying the set together.  Regenerating over the same image
produces identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .corpus import Corpus
from .model import EDGE_KIND, NODE_KIND

TRUNCATE_AT = 120


def _node_rows(corpus: Corpus, targets: np.ndarray) -> np.ndarray:
    # targets are validated node ids, so searchsorted positions are exact
    return np.searchsorted(corpus._ids, targets)


def _edge_rows(corpus: Corpus, targets: np.ndarray) -> np.ndarray:
    return np.searchsorted(corpus._edge_ids, targets)


@dataclass(frozen=True, slots=True)
class FrequencyTable:
    """Value frequencies for one feature key on one otype (or edge label)."""

    otype: str
    key: str
    kind: str
    total: int
    entries: tuple[tuple[str, int], ...]  # count desc, ties by value asc


def feature_frequency(
    corpus: Corpus, otype: str, key: str, kind: str = NODE_KIND
) -> FrequencyTable:
    """Count values of ``key`` over nodes of ``otype`` (or edges, kind "E").

    For edges, ``otype`` names the edge label.
    """
    store = corpus.store(key, kind)
    if store is None:
        raise KeyError(f"no {kind!r} feature named {key!r}")
    if kind == NODE_KIND:
        if otype not in corpus.otypes():
            raise KeyError(f"unknown otype {otype!r}")
        rank = corpus._otype_rank[otype]
        mask = corpus._otype_code[_node_rows(corpus, store.targets)] == rank
    else:
        if otype not in corpus.edge_labels():
            raise KeyError(f"unknown edge label {otype!r}")
        label_code = corpus.edge_labels().index(otype)
        mask = corpus._edge_label_code[_edge_rows(corpus, store.targets)] == label_code
    codes = store.codes[mask]
    counts = np.bincount(codes, minlength=len(store.values))
    pairs = [(store.values[i], int(counts[i])) for i in range(len(store.values)) if counts[i]]
    pairs.sort(key=lambda p: (-p[1], p[0]))
    return FrequencyTable(
        otype=otype, key=key, kind=kind, total=int(counts.sum()), entries=tuple(pairs)
    )


def _node_pairs(corpus: Corpus) -> list[tuple[str, str]]:
    pairs = []
    for key in corpus.feature_keys(NODE_KIND):
        store = corpus.store(key, NODE_KIND)
        ranks = np.unique(corpus._otype_code[_node_rows(corpus, store.targets)])
        for rank in ranks.tolist():
            pairs.append((corpus._otypes[rank], key))
    pairs.sort()
    return pairs


def _edge_pairs(corpus: Corpus) -> list[tuple[str, str]]:
    pairs = []
    labels = corpus.edge_labels()
    for key in corpus.feature_keys(EDGE_KIND):
        store = corpus.store(key, EDGE_KIND)
        for code in np.unique(corpus._edge_label_code[_edge_rows(corpus, store.targets)]).tolist():
            pairs.append((labels[code], key))
    pairs.sort()
    return pairs


def _truncate(value: str) -> str:
    if len(value) <= TRUNCATE_AT:
        return value
    return value[: TRUNCATE_AT - 1] + "…"


def _render_txt(table: FrequencyTable) -> str:
    head = f"{table.otype}.{table.key}" if table.kind == NODE_KIND else f"edge {table.otype}.{table.key}"
    lines = [
        head,
        f"total assignments: {table.total}",
        f"distinct values: {len(table.entries)}",
        "",
    ]
    width = max((len(str(c)) for _v, c in table.entries), default=1)
    for value, count in table.entries:
        lines.append(f"{count:>{width}}  {_truncate(value)}")
    return "\n".join(lines) + "\n"


def _render_json(table: FrequencyTable) -> str:
    doc = {
        "otype": table.otype,
        "key": table.key,
        "kind": table.kind,
        "total": table.total,
        "values": [{"value": v, "count": c} for v, c in table.entries],
    }
    return json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n"


def render_docs(corpus: Corpus, out_dir: str | Path) -> list[str]:
    """Write the documentation set under ``out_dir``; return the file names."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    index_rows = []

    for otype, key in _node_pairs(corpus):
        table = feature_frequency(corpus, otype, key, NODE_KIND)
        stem = f"{otype}.{key}"
        (out / f"{stem}.txt").write_text(_render_txt(table), encoding="utf-8")
        (out / f"{stem}.json").write_text(_render_json(table), encoding="utf-8")
        written += [f"{stem}.txt", f"{stem}.json"]
        index_rows.append(
            {
                "otype": otype,
                "key": key,
                "kind": NODE_KIND,
                "total": table.total,
                "distinct": len(table.entries),
                "files": [f"{stem}.txt", f"{stem}.json"],
            }
        )
    for label, key in _edge_pairs(corpus):
        table = feature_frequency(corpus, label, key, EDGE_KIND)
        stem = f"edge-{label}.{key}"
        (out / f"{stem}.txt").write_text(_render_txt(table), encoding="utf-8")
        (out / f"{stem}.json").write_text(_render_json(table), encoding="utf-8")
        written += [f"{stem}.txt", f"{stem}.json"]
        index_rows.append(
            {
                "otype": label,
                "key": key,
                "kind": EDGE_KIND,
                "total": table.total,
                "distinct": len(table.entries),
                "files": [f"{stem}.txt", f"{stem}.json"],
            }
        )

    stats = corpus.stats()
    index_doc = {
        "corpus_fingerprint": corpus.fingerprint,
        "stats": {
            "words": stats.words,
            "nodes": stats.nodes,
            "edges": stats.edges,
            "features": stats.features,
        },
        "tables": index_rows,
    }
    (out / "index.json").write_text(
        json.dumps(index_doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n",
        encoding="utf-8",
    )
    lines = [
        "feature documentation",
        f"corpus fingerprint: {corpus.fingerprint}",
        f"nodes: {stats.nodes}, features: {stats.features}",
        "",
    ]
    for row in index_rows:
        label = row["otype"] if row["kind"] == NODE_KIND else f"edge {row['otype']}"
        lines.append(
            f"{label}.{row['key']}: {row['total']} assignments, {row['distinct']} distinct values"
        )
    (out / "index.txt").write_text("\n".join(lines) + "\n", encoding="utf-8")
    written += ["index.json", "index.txt"]
    return written
