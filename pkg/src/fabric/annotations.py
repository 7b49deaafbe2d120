"""Queries as annotations: saved queries with result snapshots.

A saved query records its text, authorship metadata, and a snapshot: the
passage (verse) nodes whose monads intersect an outermost matched node,
each with those matched nodes.  The snapshot anchors the query to passages,
so browsing a passage can surface every stored query that hits it (the
margin), and result lists paginate by passage.

The store is one versioned JSON file, deterministic byte-for-byte, bound to
a corpus image by its fingerprint.  Importing against a differently
fingerprinted corpus marks every record stale instead of rejecting it; the
snapshots stay readable but are no longer claimed to be reproducible.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .corpus import Corpus
from .errors import StoreError
from .model import MonadSet
from .query.evaluator import ResultSet, evaluate

FORMAT_VERSION = 1

Snapshot = tuple[tuple[int, tuple[int, ...]], ...]


class StaleStoreWarning(UserWarning):
    """Store was written against a different compile of the corpus."""


@dataclass(frozen=True, slots=True)
class SavedQuery:
    id: int
    name: str
    author: str
    query_text: str
    description: str
    is_public: bool
    created: str  # ISO-8601 UTC
    modified: str
    corpus_fingerprint: str
    snapshot: Snapshot  # (verse node, matched outermost nodes), canonical order
    match_count: int
    verse_count: int
    stale: bool = field(default=False, compare=False)


@dataclass(frozen=True, slots=True)
class ResultPage:
    """One page of a saved query's verse list, plus navigation."""

    page: int  # 1-based; 0 when there are no pages
    total_pages: int
    entries: Snapshot
    first: int | None
    prev: int | None
    next: int | None
    last: int | None
    clamped: bool


def _now_utc() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def build_snapshot(corpus: Corpus, result: ResultSet) -> Snapshot:
    """Denormalize a result into (verse, outermost matched nodes) pairs."""
    outer_seen: set[int] = set()
    for match in result.matches:
        for tree in match:
            outer_seen.add(tree.node)
    monads: dict[int, MonadSet] = {}

    def monads_of(node: int) -> MonadSet:
        ms = monads.get(node)
        if ms is None:
            ms = corpus.monads(node)
            monads[node] = ms
        return ms

    canon = {node: i for i, node in enumerate(corpus.nodes())}
    outer = sorted(outer_seen, key=canon.__getitem__)
    snapshot = []
    for verse in result.verses:
        vset = monads_of(verse)
        inside = tuple(n for n in outer if monads_of(n).intersects(vset))
        snapshot.append((verse, inside))
    return tuple(snapshot)


class AnnotationStore:
    """Mutable collection of saved queries for one compiled corpus."""

    def __init__(self, corpus_fingerprint: str):
        self.corpus_fingerprint = corpus_fingerprint
        self.queries: dict[int, SavedQuery] = {}
        self._verse_index: dict[int, list[int]] = {}
        self._next_id = 1

    @classmethod
    def for_corpus(cls, corpus: Corpus) -> "AnnotationStore":
        return cls(corpus.fingerprint)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, AnnotationStore):
            return NotImplemented
        return (
            self.corpus_fingerprint == other.corpus_fingerprint
            and self.queries == other.queries
        )

    def verse_index(self) -> dict[int, list[int]]:
        """Verse node -> ids of saved queries whose snapshot contains it."""
        return {v: list(qids) for v, qids in self._verse_index.items()}

    def rebuild_verse_index(self) -> dict[int, list[int]]:
        """Recompute the index from snapshots (invariant: equals stored)."""
        index: dict[int, list[int]] = {}
        for qid in sorted(self.queries):
            for verse, _nodes in self.queries[qid].snapshot:
                index.setdefault(verse, []).append(qid)
        return index

    def _index_add(self, saved: SavedQuery) -> None:
        for verse, _nodes in saved.snapshot:
            self._verse_index.setdefault(verse, []).append(saved.id)
            self._verse_index[verse].sort()

    def by_author_name(self, author: str, name: str) -> SavedQuery | None:
        for saved in self.queries.values():
            if saved.author == author and saved.name == name:
                return saved
        return None


def save_query(
    store: AnnotationStore,
    corpus: Corpus,
    query_text: str,
    *,
    name: str,
    author: str,
    description: str = "",
    is_public: bool = True,
    now: str | None = None,
) -> SavedQuery:
    """Evaluate a query and persist it with its snapshot.

    Rejects a duplicate (author, name) pair; evaluation errors propagate.
    """
    if store.corpus_fingerprint != corpus.fingerprint:
        raise StoreError("store is bound to a different corpus image")
    if store.by_author_name(author, name) is not None:
        raise StoreError(f"author {author!r} already has a query named {name!r}")
    result = evaluate(corpus, query_text)
    snapshot = build_snapshot(corpus, result)
    stamp = now if now is not None else _now_utc()
    saved = SavedQuery(
        id=store._next_id,
        name=name,
        author=author,
        query_text=query_text,
        description=description,
        is_public=is_public,
        created=stamp,
        modified=stamp,
        corpus_fingerprint=corpus.fingerprint,
        snapshot=snapshot,
        match_count=result.total,
        verse_count=len(snapshot),
    )
    store._next_id += 1
    store.queries[saved.id] = saved
    store._index_add(saved)
    return saved


def margin(
    store: AnnotationStore,
    corpus: Corpus,
    passage: int,
    *,
    author: str | None = None,
    public_only: bool = False,
) -> list[tuple[SavedQuery, tuple[int, ...]]]:
    """Saved queries whose snapshot touches this passage, with the matched
    nodes inside it; ordered by author, then name."""
    try:
        otype = corpus.otype(passage)
    except KeyError:
        raise StoreError(f"unknown passage node {passage}") from None
    if otype != corpus.metadata.passage_otype:
        raise StoreError(
            f"node {passage} is a {otype}, not a {corpus.metadata.passage_otype}"
        )
    entries: list[tuple[SavedQuery, tuple[int, ...]]] = []
    for qid in store._verse_index.get(passage, ()):
        saved = store.queries[qid]
        if author is not None and saved.author != author:
            continue
        if public_only and not saved.is_public:
            continue
        nodes = next(nodes for verse, nodes in saved.snapshot if verse == passage)
        entries.append((saved, nodes))
    entries.sort(key=lambda e: (e[0].author, e[0].name, e[0].id))
    return entries


def result_page(saved: SavedQuery, page: int, page_size: int) -> ResultPage:
    """One page of the snapshot verse list (1-based pages).

    Out-of-range pages clamp to the nearest valid page with ``clamped`` set.
    An empty snapshot has zero pages and disabled navigation.
    """
    if page_size < 1:
        raise ValueError("page_size must be at least 1")
    total = len(saved.snapshot)
    total_pages = (total + page_size - 1) // page_size
    if total_pages == 0:
        return ResultPage(
            page=0, total_pages=0, entries=(),
            first=None, prev=None, next=None, last=None, clamped=False,
        )
    actual = min(max(page, 1), total_pages)
    lo = (actual - 1) * page_size
    return ResultPage(
        page=actual,
        total_pages=total_pages,
        entries=saved.snapshot[lo : lo + page_size],
        first=1,
        prev=actual - 1 if actual > 1 else None,
        next=actual + 1 if actual < total_pages else None,
        last=total_pages,
        clamped=actual != page,
    )


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------


def _saved_to_json(saved: SavedQuery) -> dict:
    return {
        "id": saved.id,
        "name": saved.name,
        "author": saved.author,
        "query": saved.query_text,
        "description": saved.description,
        "is_public": saved.is_public,
        "created": saved.created,
        "modified": saved.modified,
        "match_count": saved.match_count,
        "verse_count": saved.verse_count,
        "snapshot": [[verse, list(nodes)] for verse, nodes in saved.snapshot],
    }


def export_bytes(store: AnnotationStore) -> bytes:
    """Serialize deterministically: same store, same bytes."""
    doc = {
        "format_version": FORMAT_VERSION,
        "corpus_fingerprint": store.corpus_fingerprint,
        "queries": [_saved_to_json(store.queries[qid]) for qid in sorted(store.queries)],
    }
    return (json.dumps(doc, ensure_ascii=False, sort_keys=True, indent=2) + "\n").encode("utf-8")


def export_store(store: AnnotationStore, path: str | Path) -> None:
    Path(path).write_bytes(export_bytes(store))


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise StoreError(message)


def import_bytes(data: bytes, corpus: Corpus | None = None) -> AnnotationStore:
    """Parse a store file; verify snapshots when the corpus is supplied.

    With a matching corpus, snapshot invariants are enforced (every verse is
    a passage node, every matched node intersects it).  With a different
    fingerprint, records are marked stale and a warning is issued instead.
    """
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise StoreError(f"store file is not valid JSON: {exc}") from None
    _require(isinstance(doc, dict), "store file must hold a JSON object")
    _require(
        doc.get("format_version") == FORMAT_VERSION,
        f"unsupported store format_version {doc.get('format_version')!r}",
    )
    fingerprint = doc.get("corpus_fingerprint")
    _require(isinstance(fingerprint, str), "corpus_fingerprint must be a string")
    queries = doc.get("queries")
    _require(isinstance(queries, list), "queries must be a list")

    stale = corpus is not None and corpus.fingerprint != fingerprint
    if stale:
        warnings.warn(
            "store was written for a different corpus image; snapshots marked stale",
            StaleStoreWarning,
            stacklevel=2,
        )
    verify = corpus is not None and not stale

    store = AnnotationStore(fingerprint)
    seen_names: set[tuple[str, str]] = set()
    for entry in queries:
        _require(isinstance(entry, dict), "each query must be a JSON object")
        try:
            snapshot = tuple(
                (int(verse), tuple(int(n) for n in nodes)) for verse, nodes in entry["snapshot"]
            )
            saved = SavedQuery(
                id=int(entry["id"]),
                name=entry["name"],
                author=entry["author"],
                query_text=entry["query"],
                description=entry["description"],
                is_public=bool(entry["is_public"]),
                created=entry["created"],
                modified=entry["modified"],
                corpus_fingerprint=fingerprint,
                snapshot=snapshot,
                match_count=int(entry["match_count"]),
                verse_count=int(entry["verse_count"]),
                stale=stale,
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise StoreError(f"malformed saved query entry: {exc}") from None
        _require(saved.id not in store.queries, f"duplicate saved-query id {saved.id}")
        _require(
            (saved.author, saved.name) not in seen_names,
            f"duplicate (author, name): {saved.author!r}, {saved.name!r}",
        )
        seen_names.add((saved.author, saved.name))
        _require(saved.verse_count == len(saved.snapshot), "verse_count does not match snapshot")
        if verify:
            _verify_snapshot(corpus, saved)
        store.queries[saved.id] = saved
        store._index_add(saved)
    store._next_id = max(store.queries, default=0) + 1
    return store


def _verify_snapshot(corpus: Corpus, saved: SavedQuery) -> None:
    for verse, nodes in saved.snapshot:
        try:
            votype = corpus.otype(verse)
        except KeyError:
            raise StoreError(f"saved query {saved.id}: unknown verse node {verse}") from None
        _require(
            votype == corpus.metadata.passage_otype,
            f"saved query {saved.id}: node {verse} is not a {corpus.metadata.passage_otype}",
        )
        vset = corpus.monads(verse)
        for node in nodes:
            try:
                nset = corpus.monads(node)
            except KeyError:
                raise StoreError(f"saved query {saved.id}: unknown matched node {node}") from None
            _require(
                nset.intersects(vset),
                f"saved query {saved.id}: node {node} does not intersect verse {verse}",
            )


def import_store(path: str | Path, corpus: Corpus | None = None) -> AnnotationStore:
    return import_bytes(Path(path).read_bytes(), corpus)
