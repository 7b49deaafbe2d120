"""Index-driven query evaluation.

Semantics (shared with the brute-force oracle, which implements them
independently):

* a block matches node n iff n's otype equals the block's otype and the
  constraint expression is true on n's features;
* an atom on a key the node does not carry is false (so ``NOT`` of it is
  true); ``=``/``<>``/``IN`` compare strings, or integers when the key is
  declared integer-typed; ``~`` uses regex search; ``<``/``<=``/``>``/``>=``
  require an integer-typed key;
* nested blocks match nodes embedded in their parent's node (monad subset,
  distinct node);
* consecutive blocks in a block string satisfy their gap: juxtaposition
  means adjacency, ``..`` means strictly before, ``.. <= k`` bounds the
  monads skipped;
* matches are emitted in lexicographic order of the canonical positions of
  matched nodes in query pre-order.

Candidate generation follows rarest-posting-first: a block whose constraint
conjunctively requires ``key = value`` (or IN) can start from that value's
posting list instead of the full otype list; the chosen source is what
``explain`` reports.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Iterator

import numpy as np

from ..corpus import Corpus, FeatureStore
from ..errors import QueryError
from ..model import MonadSet
from .syntax import ADJACENT, And, Atom, Block, BlockString, Expr, Gap, Not, Query, parse


@dataclass(frozen=True, slots=True)
class MatchTree:
    """One matched node plus one subtree per nested block (same shape as
    the query)."""

    node: int
    children: tuple["MatchTree", ...] = ()


Match = tuple[MatchTree, ...]


@dataclass(frozen=True, slots=True)
class ResultSet:
    """All matches of a query in deterministic order.

    ``verses`` lists the distinct passage-otype nodes whose monads intersect
    any outermost matched node, in canonical order.  ``truncated`` is set
    when max_matches or timeout cut enumeration short.
    """

    matches: tuple[Match, ...]
    total: int
    verses: tuple[int, ...]
    truncated: bool = False


@dataclass(frozen=True, slots=True)
class Source:
    """Candidate source chosen for a block (also surfaced by explain)."""

    kind: str  # "otype" or "posting"
    otype: str
    key: str | None = None
    operand: str | tuple[str, ...] | None = None
    estimate: int = 0


def _conjunctive_spine(expr: Expr | None) -> list[Atom]:
    """Atoms that every match of the constraint must satisfy."""
    if expr is None:
        return []
    if isinstance(expr, Atom):
        return [expr]
    if isinstance(expr, And):
        out: list[Atom] = []
        for part in expr.parts:
            out.extend(_conjunctive_spine(part))
        return out
    return []  # Or / Not never guarantee an atom


class _Eval:
    def __init__(self, corpus: Corpus, query: Query):
        self.c = corpus
        self.q = query
        self._counts: dict[str, np.ndarray] = {}
        self._int_dicts: dict[str, np.ndarray] = {}
        self._regex_masks: dict[tuple[str, str], np.ndarray] = {}
        self._cands: dict[int, np.ndarray] = {}
        self._sources: dict[int, Source] = {}
        for block in query.blocks_preorder():
            self._resolve_block(block)

    # -- resolution (errors before any matching work) ------------------------

    def _resolve_block(self, block: Block) -> None:
        if block.otype not in self.c._otype_rank:
            raise QueryError(f"unknown otype {block.otype!r}")
        if block.constraint is not None:
            self._resolve_expr(block.constraint)

    def _resolve_expr(self, expr: Expr) -> None:
        if isinstance(expr, Atom):
            self._resolve_atom(expr)
        elif isinstance(expr, Not):
            self._resolve_atom(expr.inner)
        else:
            for part in expr.parts:
                self._resolve_expr(part)

    def _resolve_atom(self, atom: Atom) -> None:
        store = self.c.store(atom.key)
        if store is None:
            raise QueryError(f"unknown feature key {atom.key!r}")
        int_typed = atom.key in self.c.metadata.int_features
        if atom.op in ("<", "<=", ">", ">="):
            if not int_typed:
                raise QueryError(
                    f"feature {atom.key!r} is not integer-typed; {atom.op} needs an integer-typed key"
                )
            if not isinstance(atom.operand, int):
                raise QueryError(f"{atom.op} on {atom.key!r} needs an integer operand")
        elif int_typed and atom.op in ("=", "<>"):
            self._int_operand(atom)
        elif int_typed and atom.op == "IN":
            for member in atom.operand:  # type: ignore[union-attr]
                self._int_member(atom.key, member)

    def _int_operand(self, atom: Atom) -> int:
        if isinstance(atom.operand, int):
            return atom.operand
        try:
            return int(atom.operand)  # type: ignore[arg-type]
        except (TypeError, ValueError):
            raise QueryError(
                f"feature {atom.key!r} is integer-typed but operand {atom.operand!r} is not an integer"
            ) from None

    def _int_member(self, key: str, member: str) -> int:
        try:
            return int(member)
        except ValueError:
            raise QueryError(
                f"feature {key!r} is integer-typed but IN member {member!r} is not an integer"
            ) from None

    # -- vectorized atom evaluation ------------------------------------------

    def _store_counts(self, key: str, store: FeatureStore) -> np.ndarray:
        counts = self._counts.get(key)
        if counts is None:
            counts = store.value_counts()
            self._counts[key] = counts
        return counts

    def _int_dict(self, key: str, store: FeatureStore) -> np.ndarray:
        ivals = self._int_dicts.get(key)
        if ivals is None:
            ivals = np.fromiter((int(v) for v in store.values), dtype=np.int64, count=len(store.values))
            self._int_dicts[key] = ivals
        return ivals

    def _presence_codes(self, store: FeatureStore, ids: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        if len(store.targets) == 0:
            zeros = np.zeros(len(ids), dtype=np.int64)
            return np.zeros(len(ids), dtype=bool), zeros
        idx = np.searchsorted(store.targets, ids)
        idx = np.minimum(idx, len(store.targets) - 1)
        present = store.targets[idx] == ids
        codes = store.codes[idx].astype(np.int64)
        return present, codes

    def _code_of(self, store: FeatureStore, value: str) -> int | None:
        try:
            return store.values.index(value)
        except ValueError:
            return None

    def _atom_mask(self, atom: Atom, ids: np.ndarray) -> np.ndarray:
        store = self.c.store(atom.key)
        assert store is not None
        present, codes = self._presence_codes(store, ids)
        int_typed = atom.key in self.c.metadata.int_features
        op = atom.op
        if op in ("<", "<=", ">", ">="):
            vals = self._int_dict(atom.key, store)[codes]
            k = atom.operand
            if op == "<":
                return present & (vals < k)
            if op == "<=":
                return present & (vals <= k)
            if op == ">":
                return present & (vals > k)
            return present & (vals >= k)
        if op in ("=", "<>"):
            if int_typed:
                vals = self._int_dict(atom.key, store)[codes]
                hit = vals == self._int_operand(atom)
            else:
                code = self._code_of(store, str(atom.operand))
                hit = codes == code if code is not None else np.zeros(len(ids), dtype=bool)
            return present & (hit if op == "=" else ~hit)
        if op == "IN":
            members = atom.operand  # tuple[str, ...]
            if int_typed:
                vals = self._int_dict(atom.key, store)[codes]
                wanted = np.asarray([self._int_member(atom.key, m) for m in members], dtype=np.int64)
                return present & np.isin(vals, wanted)
            member_codes = [c for c in (self._code_of(store, m) for m in members) if c is not None]
            if not member_codes:
                return np.zeros(len(ids), dtype=bool)
            return present & np.isin(codes, np.asarray(member_codes, dtype=np.int64))
        # op == "~"
        mask_key = (atom.key, atom.operand)  # pattern source string
        value_mask = self._regex_masks.get(mask_key)
        if value_mask is None:
            assert atom.pattern is not None
            value_mask = np.fromiter(
                (atom.pattern.search(v) is not None for v in store.values),
                dtype=bool,
                count=len(store.values),
            )
            self._regex_masks[mask_key] = value_mask
        if len(value_mask) == 0:
            return np.zeros(len(ids), dtype=bool)
        return present & value_mask[codes]

    def _expr_mask(self, expr: Expr, ids: np.ndarray) -> np.ndarray:
        if isinstance(expr, Atom):
            return self._atom_mask(expr, ids)
        if isinstance(expr, Not):
            return ~self._atom_mask(expr.inner, ids)
        if isinstance(expr, And):
            mask = self._expr_mask(expr.parts[0], ids)
            for part in expr.parts[1:]:
                mask &= self._expr_mask(part, ids)
            return mask
        mask = self._expr_mask(expr.parts[0], ids)
        for part in expr.parts[1:]:
            mask |= self._expr_mask(part, ids)
        return mask

    # -- candidate generation -------------------------------------------------

    def source_for(self, block: Block) -> Source:
        cached = self._sources.get(id(block))
        if cached is not None:
            return cached
        otype_count = len(self.c._rows_for_otype(self.c._otype_rank[block.otype]))
        best = Source(kind="otype", otype=block.otype, estimate=otype_count)
        for atom in _conjunctive_spine(block.constraint):
            if atom.op not in ("=", "IN") or atom.key in self.c.metadata.int_features:
                continue
            store = self.c.store(atom.key)
            counts = self._store_counts(atom.key, store)
            if atom.op == "=":
                code = self._code_of(store, str(atom.operand))
                estimate = int(counts[code]) if code is not None else 0
                operand: str | tuple[str, ...] = str(atom.operand)
            else:
                codes = [self._code_of(store, m) for m in atom.operand]
                estimate = sum(int(counts[c]) for c in codes if c is not None)
                operand = atom.operand
            if estimate < best.estimate:
                best = Source(
                    kind="posting", otype=block.otype, key=atom.key, operand=operand, estimate=estimate
                )
        self._sources[id(block)] = best
        return best

    def _posting_rows(self, source: Source) -> np.ndarray:
        store = self.c.store(source.key)
        if isinstance(source.operand, tuple):
            wanted = [self._code_of(store, m) for m in source.operand]
            sel = np.isin(store.codes, np.asarray([c for c in wanted if c is not None], dtype=np.int64))
        else:
            code = self._code_of(store, source.operand)
            if code is None:
                return np.empty(0, dtype=np.int64)
            sel = store.codes == code
        targets = store.targets[sel]
        # Every feature target is a node id (validated at ingest), so the
        # searchsorted positions are exact rows.
        return np.searchsorted(self.c._ids, targets).astype(np.int64)

    def candidates(self, block: Block) -> np.ndarray:
        """Rows matching this block alone, in canonical order."""
        rows = self._cands.get(id(block))
        if rows is not None:
            return rows
        source = self.source_for(block)
        code = self.c._otype_rank[block.otype]
        if source.kind == "posting":
            rows = self._posting_rows(source)
            rows = rows[self.c._otype_code[rows] == code]
        else:
            rows = self.c._rows_for_otype(code)
        if block.constraint is not None and len(rows):
            rows = rows[self._expr_mask(block.constraint, self.c._ids[rows])]
        rows = rows[np.argsort(self.c._canon_pos[rows], kind="stable")]
        self._cands[id(block)] = rows
        return rows

    def candidates_in(self, block: Block, parent_row: int) -> np.ndarray:
        """Block candidates embedded in the parent row, canonical order."""
        rows = self.candidates(block)
        f, l = int(self.c._first[parent_row]), int(self.c._last[parent_row])
        rows = rows[(self.c._first[rows] >= f) & (self.c._last[rows] <= l)]
        rows = rows[rows != parent_row]
        outer_runs = self.c._runs_of_set(int(self.c._monad_idx[parent_row]))
        return self.c._subset_rows(rows, outer_runs)

    # -- enumeration -----------------------------------------------------------

    def gap_ok(self, gap: Gap, prev_row: int, row: int) -> bool:
        prev_last = int(self.c._last[prev_row])
        first = int(self.c._first[row])
        if gap.kind == ADJACENT:
            return first == prev_last + 1
        if first <= prev_last:
            return False
        return gap.limit is None or first - prev_last - 1 <= gap.limit

    def iter_blockstring(self, bs: BlockString, parent_row: int | None) -> Iterator[Match]:
        blocks = bs.blocks
        cands = [
            self.candidates(b) if parent_row is None else self.candidates_in(b, parent_row)
            for b in blocks
        ]

        def rec(i: int, prev_row: int, acc: list[MatchTree]) -> Iterator[Match]:
            if i == len(blocks):
                yield tuple(acc)
                return
            block = blocks[i]
            for np_row in cands[i]:
                row = int(np_row)
                if i and not self.gap_ok(bs.gaps[i - 1], prev_row, row):
                    continue
                node = int(self.c._ids[row])
                if block.children is None:
                    acc.append(MatchTree(node=node))
                    yield from rec(i + 1, row, acc)
                    acc.pop()
                else:
                    for kids in self.iter_blockstring(block.children, row):
                        acc.append(MatchTree(node=node, children=kids))
                        yield from rec(i + 1, row, acc)
                        acc.pop()

        yield from rec(0, -1, [])


def _as_query(query: Query | str) -> Query:
    return parse(query) if isinstance(query, str) else query


def iter_matches(corpus: Corpus, query: Query | str) -> Iterator[Match]:
    """Stream matches in deterministic order without materializing them."""
    q = _as_query(query)
    return _Eval(corpus, q).iter_blockstring(q.root, None)


def _verses_for(corpus: Corpus, matches: list[Match]) -> tuple[int, ...]:
    passage_code = corpus._otype_rank.get(corpus.metadata.passage_otype)
    if passage_code is None:
        return ()
    prows = corpus._rows_for_otype(passage_code)
    if not len(prows):
        return ()
    seen: set[int] = set()
    monad_cache: dict[int, MonadSet] = {}
    for match in matches:
        for tree in match:
            row = int(np.searchsorted(corpus._ids, tree.node))
            node_set = monad_cache.get(row)
            if node_set is None:
                node_set = MonadSet(corpus._runs_of_set(int(corpus._monad_idx[row])))
                monad_cache[row] = node_set
            f, l = int(corpus._first[row]), int(corpus._last[row])
            env = prows[(corpus._first[prows] <= l) & (corpus._last[prows] >= f)]
            for vrow in env:
                vrow = int(vrow)
                if vrow in seen:
                    continue
                verse_set = MonadSet(corpus._runs_of_set(int(corpus._monad_idx[vrow])))
                if node_set.intersects(verse_set):
                    seen.add(vrow)
    ordered = sorted(seen, key=lambda r: int(corpus._canon_pos[r]))
    return tuple(int(corpus._ids[r]) for r in ordered)


def evaluate(
    corpus: Corpus,
    query: Query | str,
    *,
    max_matches: int | None = None,
    timeout: float | None = None,
) -> ResultSet:
    """Evaluate a query, returning every match unless limits cut off.

    ``max_matches`` bounds the number of matches kept; ``timeout`` (seconds)
    bounds wall time, checked between matches.  Either cutoff sets
    ``truncated``.
    """
    q = _as_query(query)
    deadline = None if timeout is None else time.monotonic() + timeout
    matches: list[Match] = []
    truncated = False
    for match in iter_matches(corpus, q):
        if deadline is not None and time.monotonic() >= deadline:
            truncated = True
            break
        if max_matches is not None and len(matches) >= max_matches:
            truncated = True
            break
        matches.append(match)
    return ResultSet(
        matches=tuple(matches),
        total=len(matches),
        verses=_verses_for(corpus, matches),
        truncated=truncated,
    )
