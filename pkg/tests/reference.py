"""First-principles re-implementations used as test oracles.

Everything here works on plain Python sets and lists, deliberately
avoiding the package's own data structures, so a bug in the engine cannot
hide inside the expectation.
"""

from __future__ import annotations

from collections import Counter


def monad_set(node) -> frozenset[int]:
    """Node's monads as a plain frozenset, via public iteration."""
    return frozenset(node.monads)


def rank_table(declared: tuple[str, ...], present: set[str], slot_otype: str) -> dict[str, int]:
    order = [t for t in declared if t != slot_otype]
    order += sorted(t for t in present - set(declared) if t != slot_otype)
    order.append(slot_otype)
    return {t: i for i, t in enumerate(order)}


def sort_key(monads: frozenset[int], rank: int, node_id: int):
    return (min(monads), -max(monads), rank, node_id)


def canonical_sorted(nodes, metadata) -> list[int]:
    """Node ids in canonical order, computed straight from the definition."""
    ranks = rank_table(
        metadata.otypes, {n.otype for n in nodes}, metadata.slot_otype
    )
    ordered = sorted(
        nodes, key=lambda n: sort_key(monad_set(n), ranks[n.otype], n.id)
    )
    return [n.id for n in ordered]


def embeds(a_monads: frozenset[int], b_monads: frozenset[int], same_node: bool) -> bool:
    return not same_node and b_monads <= a_monads


def sequence_before(a_monads: frozenset[int], b_monads: frozenset[int]) -> bool:
    return max(a_monads) < min(b_monads)


def adjacent(a_monads: frozenset[int], b_monads: frozenset[int]) -> bool:
    return max(a_monads) + 1 == min(b_monads)


def text_of(text: str, slots, monads: frozenset[int]) -> str:
    pieces = []
    prev_end = None
    for m in sorted(monads):
        region = slots[m - 1]
        if prev_end is not None and region.start != prev_end:
            pieces.append(" ")
        pieces.append(text[region.start : region.end])
        prev_end = region.end
    return "".join(pieces)


def frequency(values) -> list[tuple[str, int]]:
    counts = Counter(values)
    return sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))


def flatten_match(match) -> tuple[int, ...]:
    """Match tree tuple -> node ids in query pre-order."""
    out: list[int] = []

    def walk(trees) -> None:
        for tree in trees:
            out.append(tree.node)
            walk(tree.children)

    walk(match)
    return tuple(out)


def result_rows(result) -> list[tuple[int, ...]]:
    return [flatten_match(m) for m in result.matches]
