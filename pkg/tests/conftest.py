from __future__ import annotations

import json
from pathlib import Path

import pytest

from fabric.compiler import compile_corpus, compile_to_bytes
from fabric.corpus import Corpus
from fabric.synth import toy4, write_graf, write_tabular

GOLDEN_DIR = Path(__file__).parent / "golden"


@pytest.fixture(scope="session")
def toy4_logical():
    return toy4()


@pytest.fixture(scope="session")
def toy4_bytes(toy4_logical):
    data, _ = compile_to_bytes(toy4_logical)
    return data


@pytest.fixture(scope="session")
def toy4_corpus(toy4_bytes):
    return Corpus.from_bytes(toy4_bytes)


@pytest.fixture(scope="session")
def toy4_tree(tmp_path_factory, toy4_logical):
    """On-disk TOY4: GrAF header, tabular directory, compiled image."""
    root = tmp_path_factory.mktemp("toy4")
    graf = root / "graf"
    tabular = root / "tabular"
    graf.mkdir()
    tabular.mkdir()
    write_graf(toy4_logical, graf, stem="toy4")
    write_tabular(toy4_logical, tabular)
    compile_corpus(toy4_logical, root / "toy4.fab")
    return root


def load_golden(name: str):
    with open(GOLDEN_DIR / name, encoding="utf-8") as handle:
        return json.load(handle)


@pytest.fixture(scope="session")
def golden():
    return load_golden
