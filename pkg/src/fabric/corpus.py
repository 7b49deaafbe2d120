"""Read-only corpus API over a compiled image.

``Corpus.from_file`` maps the image sections onto numpy views without
copying the node tables; opening a corpus costs integrity checks plus one
sort, not a parse.  All arrays are read-only views of the image bytes.

Node identity in this API is the integer node id.  Canonical order is
(first monad asc, last monad desc, otype rank asc, id asc).
"""

from __future__ import annotations

import json
import warnings
from functools import cached_property
from pathlib import Path
from typing import Iterator

import numpy as np

from . import image
from .errors import ImageError
from .model import (
    EDGE_KIND,
    NODE_KIND,
    CorpusMetadata,
    CorpusStats,
    Edge,
    FeatureAssignment,
    LogicalCorpus,
    MonadSet,
    Node,
    Region,
)

_KINDS = (NODE_KIND, EDGE_KIND)


class UnknownOtypeWarning(UserWarning):
    """Asked for nodes of an otype the corpus does not contain."""


def _u32view(buf: memoryview, offset: int, count: int) -> np.ndarray:
    arr = np.frombuffer(buf, dtype="<u4", count=count, offset=offset)
    return arr


def _unpack_strtable(buf: memoryview) -> tuple[str, ...]:
    count = int(_u32view(buf, 0, 1)[0])
    offsets = _u32view(buf, 8, count + 1)
    blob = bytes(buf[8 + 4 * (count + 1) :])
    return tuple(blob[offsets[i] : offsets[i + 1]].decode("utf-8") for i in range(count))


class FeatureStore:
    """One (kind, key) feature table: sorted targets, dictionary codes."""

    __slots__ = ("targets", "codes", "values")

    def __init__(self, payload: memoryview):
        count = int(_u32view(payload, 0, 1)[0])
        self.targets = _u32view(payload, 8, count)
        self.codes = _u32view(payload, 8 + 4 * count, count)
        self.values = _unpack_strtable(payload[8 + 8 * count :])

    def __len__(self) -> int:
        return len(self.targets)

    def code_of(self, target: int) -> int | None:
        i = int(np.searchsorted(self.targets, target))
        if i < len(self.targets) and int(self.targets[i]) == target:
            return int(self.codes[i])
        return None

    def get(self, target: int) -> str | None:
        code = self.code_of(target)
        return None if code is None else self.values[code]

    def items(self) -> Iterator[tuple[int, str]]:
        for i in range(len(self.targets)):
            yield int(self.targets[i]), self.values[int(self.codes[i])]

    def value_counts(self) -> np.ndarray:
        """Occurrences per dictionary code (codes are frequency-ordered)."""
        return np.bincount(self.codes, minlength=len(self.values))


class Corpus:
    """A loaded image: verified once, then served from read-only views."""

    def __init__(self, data: bytes):
        self._data = data
        entries = image.read_directory(data)
        image.verify_sections(data, entries)
        view = memoryview(data)
        payloads = {e.id: view[e.offset : e.offset + e.length] for e in entries}
        self._entries = entries

        def need(sid: int) -> memoryview:
            if sid not in payloads:
                name = image.SECTION_NAMES.get(sid, str(sid))
                raise ImageError("BAD_DIRECTORY", f"image is missing section {name}", section=name)
            return payloads[sid]

        self.text: str = bytes(need(image.TEXT)).decode("utf-8")

        slots = need(image.SLOTS)
        width = int(_u32view(slots, 0, 1)[0])
        self._slot_starts = _u32view(slots, 8, width)
        self._slot_ends = _u32view(slots, 8 + 4 * width, width)

        self._otypes = _unpack_strtable(need(image.OTYPES))
        self._otype_rank = {name: i for i, name in enumerate(self._otypes)}

        pool = need(image.MONADPOOL)
        pool_count = int(_u32view(pool, 0, 1)[0])
        run_count = int(_u32view(pool, 4, 1)[0])
        self._set_offsets = _u32view(pool, 8, pool_count + 1)
        base = 8 + 4 * (pool_count + 1)
        self._run_first = _u32view(pool, base, run_count)
        self._run_last = _u32view(pool, base + 4 * run_count, run_count)
        self._set_nruns = np.diff(self._set_offsets.astype(np.int64))

        nodes = need(image.NODES)
        n = int(_u32view(nodes, 0, 1)[0])
        self._ids = _u32view(nodes, 8, n)
        self._otype_code = _u32view(nodes, 8 + 4 * n, n)
        self._monad_idx = _u32view(nodes, 8 + 8 * n, n)

        # Per-node monad envelope, derived from the pool in one gather.
        sets = self._monad_idx.astype(np.int64)
        self._first = self._run_first[self._set_offsets[sets]].astype(np.int64)
        self._last = self._run_last[self._set_offsets[sets + 1] - 1].astype(np.int64)
        self._nruns = self._set_nruns[sets]

        # Canonical permutation; lexsort treats its last key as primary.
        self._canon = np.lexsort((self._ids, self._otype_code, -self._last, self._first))
        self._canon_pos = np.empty(n, dtype=np.int64)
        self._canon_pos[self._canon] = np.arange(n)

        self._edge_labels = _unpack_strtable(need(image.EDGELABELS))
        edges = need(image.EDGES)
        e = int(_u32view(edges, 0, 1)[0])
        self._edge_ids = _u32view(edges, 8, e)
        self._edge_src = _u32view(edges, 8 + 4 * e, e)
        self._edge_dst = _u32view(edges, 8 + 8 * e, e)
        self._edge_label_code = _u32view(edges, 8 + 12 * e, e)

        meta = json.loads(bytes(need(image.METADATA)).decode("utf-8"))
        self.metadata = CorpusMetadata(
            otypes=tuple(meta["otypes"]),
            slot_otype=meta["slot_otype"],
            int_features=frozenset(meta["int_features"]),
            passage_otype=meta["passage_otype"],
            provenance=tuple(meta["provenance"]),
        )

        stats = np.frombuffer(need(image.STATS), dtype="<u8", count=4)
        self._stats = CorpusStats(
            words=int(stats[0]), nodes=int(stats[1]), features=int(stats[2]), edges=int(stats[3])
        )

        findex = need(image.FEATINDEX)
        fcount = int(_u32view(findex, 0, 1)[0])
        fids = _u32view(findex, 8, fcount)
        fkinds = _u32view(findex, 8 + 4 * fcount, fcount)
        foffsets = _u32view(findex, 8 + 8 * fcount, fcount + 1)
        fblob = bytes(findex[8 + 8 * fcount + 4 * (fcount + 1) :])
        self._feature_sections: dict[tuple[str, str], int] = {}
        for i in range(fcount):
            key = fblob[foffsets[i] : foffsets[i + 1]].decode("utf-8")
            self._feature_sections[(_KINDS[int(fkinds[i])], key)] = int(fids[i])
        self._payloads = payloads
        self._stores: dict[tuple[str, str], FeatureStore] = {}
        self._otype_rows: dict[int, np.ndarray] = {}

    # -- construction -------------------------------------------------------

    @classmethod
    def from_bytes(cls, data: bytes) -> Corpus:
        return cls(data)

    @classmethod
    def from_file(cls, path: str | Path) -> Corpus:
        return cls(Path(path).read_bytes())

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 over the image bytes; identifies this exact compile."""
        return image.fingerprint(self._data)

    # -- low-level accessors ------------------------------------------------

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def width(self) -> int:
        """Number of slots (monads)."""
        return len(self._slot_starts)

    def stats(self) -> CorpusStats:
        return self._stats

    def otypes(self) -> tuple[str, ...]:
        """All otypes in rank order; the slot otype is last."""
        return self._otypes

    def feature_keys(self, kind: str = NODE_KIND) -> tuple[str, ...]:
        return tuple(sorted(key for k, key in self._feature_sections if k == kind))

    def store(self, key: str, kind: str = NODE_KIND) -> FeatureStore | None:
        sid = self._feature_sections.get((kind, key))
        if sid is None:
            return None
        cached = self._stores.get((kind, key))
        if cached is None:
            cached = FeatureStore(self._payloads[sid])
            self._stores[(kind, key)] = cached
        return cached

    def _row(self, node: int) -> int:
        i = int(np.searchsorted(self._ids, node))
        if i >= len(self._ids) or int(self._ids[i]) != node:
            raise KeyError(f"no node with id {node}")
        return i

    def _runs_of_set(self, set_idx: int) -> tuple[tuple[int, int], ...]:
        lo, hi = int(self._set_offsets[set_idx]), int(self._set_offsets[set_idx + 1])
        return tuple(
            (int(self._run_first[i]), int(self._run_last[i])) for i in range(lo, hi)
        )

    def monads(self, node: int) -> MonadSet:
        return MonadSet(self._runs_of_set(int(self._monad_idx[self._row(node)])))

    def otype(self, node: int) -> str:
        return self._otypes[int(self._otype_code[self._row(node)])]

    # -- traversal ----------------------------------------------------------

    def _rows_for_otype(self, code: int) -> np.ndarray:
        rows = self._otype_rows.get(code)
        if rows is None:
            rows = self._canon[self._otype_code[self._canon] == code]
            self._otype_rows[code] = rows
        return rows

    def nodes(self, otype: str | None = None) -> Iterator[int]:
        """All nodes in canonical order, optionally restricted to one otype.

        An unknown otype yields nothing but warns immediately, since it is
        more often a typo than an intentionally empty selection.
        """
        if otype is None:
            rows = self._canon
        else:
            code = self._otype_rank.get(otype)
            if code is None:
                warnings.warn(f"unknown otype {otype!r}", UnknownOtypeWarning, stacklevel=2)
                rows = self._canon[:0]
            else:
                rows = self._rows_for_otype(code)
        return (int(self._ids[row]) for row in rows)

    def feature(self, target: int, key: str, kind: str = NODE_KIND) -> str | None:
        """Value of a feature, or None when the target has no value for it."""
        store = self.store(key, kind)
        return None if store is None else store.get(target)

    def _subset_rows(self, rows: np.ndarray, outer_runs: tuple[tuple[int, int], ...]) -> np.ndarray:
        """Filter candidate rows to those whose monads are a subset of
        outer_runs.  Candidates must already satisfy the envelope test."""
        if len(outer_runs) == 1:
            return rows
        keep = []
        run_starts = np.asarray([r[0] for r in outer_runs], dtype=np.int64)
        run_ends = np.asarray([r[1] for r in outer_runs], dtype=np.int64)
        for row in rows:
            set_idx = int(self._monad_idx[row])
            lo, hi = int(self._set_offsets[set_idx]), int(self._set_offsets[set_idx + 1])
            ok = True
            for i in range(lo, hi):
                a, b = int(self._run_first[i]), int(self._run_last[i])
                j = int(np.searchsorted(run_starts, a, side="right")) - 1
                if j < 0 or b > int(run_ends[j]):
                    ok = False
                    break
            if ok:
                keep.append(row)
        return np.asarray(keep, dtype=np.int64)

    def _superset_rows(self, rows: np.ndarray, inner_runs: tuple[tuple[int, int], ...]) -> np.ndarray:
        """Filter candidate rows to those whose monads are a superset of
        inner_runs."""
        keep = []
        for row in rows:
            if int(self._nruns[row]) == 1:
                keep.append(row)  # envelope test already proved coverage
                continue
            set_idx = int(self._monad_idx[row])
            lo, hi = int(self._set_offsets[set_idx]), int(self._set_offsets[set_idx + 1])
            starts = self._run_first[lo:hi].astype(np.int64)
            ends = self._run_last[lo:hi]
            ok = True
            for a, b in inner_runs:
                j = int(np.searchsorted(starts, a, side="right")) - 1
                if j < 0 or b > int(ends[j]):
                    ok = False
                    break
            if ok:
                keep.append(row)
        return np.asarray(keep, dtype=np.int64)

    def up(self, node: int, otype: str | None = None) -> list[int]:
        """Nodes embedding this one (monad superset, self excluded), in
        canonical order; optionally one otype only."""
        row = self._row(node)
        first, last = int(self._first[row]), int(self._last[row])
        mask = (self._first <= first) & (self._last >= last)
        if otype is not None:
            code = self._otype_rank.get(otype)
            if code is None:
                warnings.warn(f"unknown otype {otype!r}", UnknownOtypeWarning, stacklevel=2)
                return []
            mask &= self._otype_code == code
        cand = np.nonzero(mask)[0]
        cand = cand[cand != row]
        cand = self._superset_rows(cand, self._runs_of_set(int(self._monad_idx[row])))
        ordered = cand[np.argsort(self._canon_pos[cand])]
        return [int(self._ids[r]) for r in ordered]

    def down(self, node: int, otype: str | None = None) -> list[int]:
        """Nodes embedded in this one (monad subset, self excluded), in
        canonical order; optionally one otype only."""
        row = self._row(node)
        first, last = int(self._first[row]), int(self._last[row])
        mask = (self._first >= first) & (self._last <= last)
        if otype is not None:
            code = self._otype_rank.get(otype)
            if code is None:
                warnings.warn(f"unknown otype {otype!r}", UnknownOtypeWarning, stacklevel=2)
                return []
            mask &= self._otype_code == code
        cand = np.nonzero(mask)[0]
        cand = cand[cand != row]
        cand = self._subset_rows(cand, self._runs_of_set(int(self._monad_idx[row])))
        ordered = cand[np.argsort(self._canon_pos[cand])]
        return [int(self._ids[r]) for r in ordered]

    def text_of(self, node: int) -> str:
        """Primary text covered by the node's monads, in ascending monad
        order: slot substrings concatenate directly when their character
        regions touch, and are joined with a single space otherwise."""
        row = self._row(node)
        pieces: list[str] = []
        prev_end = -1
        for a, b in self._runs_of_set(int(self._monad_idx[row])):
            for m in range(a, b + 1):
                start, end = int(self._slot_starts[m - 1]), int(self._slot_ends[m - 1])
                if prev_end >= 0 and start != prev_end:
                    pieces.append(" ")
                pieces.append(self.text[start:end])
                prev_end = end
        return "".join(pieces)

    def passage_of(self, node: int) -> int | None:
        """First passage-otype node (canonical order) whose monads intersect
        this node's, or None when no passage touches it."""
        code = self._otype_rank.get(self.metadata.passage_otype)
        if code is None:
            return None
        rows = self._rows_for_otype(code)
        if not len(rows):
            return None
        row = self._row(node)
        first, last = int(self._first[row]), int(self._last[row])
        cand = rows[(self._first[rows] <= last) & (self._last[rows] >= first)]
        target = MonadSet(self._runs_of_set(int(self._monad_idx[row])))
        for r in cand:
            inner = MonadSet(self._runs_of_set(int(self._monad_idx[int(r)])))
            if inner.intersects(target):
                return int(self._ids[int(r)])
        return None

    def slot_region(self, monad: int) -> Region:
        if not 1 <= monad <= self.width:
            raise KeyError(f"monad {monad} outside 1..{self.width}")
        return Region(int(self._slot_starts[monad - 1]), int(self._slot_ends[monad - 1]))

    def edges(self) -> Iterator[Edge]:
        for i in range(len(self._edge_ids)):
            yield Edge(
                id=int(self._edge_ids[i]),
                src=int(self._edge_src[i]),
                dst=int(self._edge_dst[i]),
                label=self._edge_labels[int(self._edge_label_code[i])],
            )

    def edge_labels(self) -> tuple[str, ...]:
        return self._edge_labels

    # -- reconstruction ------------------------------------------------------

    def as_logical_corpus(self) -> LogicalCorpus:
        """Rebuild the logical corpus this image was compiled from."""
        slots = tuple(
            Region(int(self._slot_starts[i]), int(self._slot_ends[i])) for i in range(self.width)
        )
        nodes = [
            Node(
                id=int(self._ids[i]),
                otype=self._otypes[int(self._otype_code[i])],
                monads=MonadSet(self._runs_of_set(int(self._monad_idx[i]))),
            )
            for i in range(len(self._ids))
        ]
        features = [
            FeatureAssignment(kind=kind, target=target, key=key, value=value)
            for (kind, key) in sorted(self._feature_sections)
            for target, value in self.store(key, kind).items()
        ]
        return LogicalCorpus.assemble(
            text=self.text,
            slots=slots,
            nodes=nodes,
            edges=list(self.edges()),
            features=features,
            metadata=self.metadata,
        )
