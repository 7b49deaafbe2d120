"""Hypothesis strategies shared across the suite."""

from __future__ import annotations

import random

from hypothesis import strategies as st

from fabric.model import MonadSet
from fabric.synth import random_corpus, random_query

monads = st.frozensets(st.integers(min_value=1, max_value=80), min_size=1)

monad_sets = monads.map(lambda s: MonadSet.from_monads(s))

cell_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",)), max_size=30
)


@st.composite
def logical_corpora(draw, max_words: int = 24, tricky: bool = True):
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_corpus(random.Random(seed), max_words=max_words, tricky_values=tricky)


@st.composite
def corpus_and_query(draw, max_words: int = 20):
    from fabric.compiler import compile_to_bytes
    from fabric.corpus import Corpus

    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    rng = random.Random(seed)
    logical = random_corpus(rng, max_words=max_words)
    corpus = Corpus.from_bytes(compile_to_bytes(logical)[0])
    query = random_query(rng, corpus)
    return corpus, query
