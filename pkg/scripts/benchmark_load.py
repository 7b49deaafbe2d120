#!/usr/bin/env python3
"""Measure XML ingest time against binary image load time.

Generates a large synthetic corpus (default 500,000 slots, which yields
over a million nodes), ingests the XML, compiles the image, then times a
cold load of the image.  The interesting number is the ratio: the image
should load at least ten times faster than the XML parses.

    python scripts/benchmark_load.py --words 500000 --workdir /tmp/bench
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from fabric.compiler import compile_corpus
from fabric.corpus import Corpus
from fabric.ingest import parse_graf
from fabric.synth import write_big_graf


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--words", type=int, default=500_000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--workdir", type=Path, default=Path("bench-work"))
    args = parser.parse_args()

    args.workdir.mkdir(parents=True, exist_ok=True)
    print(f"generating {args.words} words of XML ...")
    t0 = time.perf_counter()
    header = write_big_graf(args.workdir, words=args.words, seed=args.seed)
    t_gen = time.perf_counter() - t0
    xml_bytes = (args.workdir / "big.xml").stat().st_size
    print(f"  {xml_bytes / 1e6:.1f} MB of XML in {t_gen:.1f}s")

    print("ingesting XML ...")
    t0 = time.perf_counter()
    corpus = parse_graf(header)
    t_ingest = time.perf_counter() - t0
    stats = corpus.stats()
    print(f"  {stats.words} words, {stats.nodes} nodes, {stats.features} features in {t_ingest:.1f}s")

    image_path = args.workdir / "big.fab"
    print("compiling image ...")
    t0 = time.perf_counter()
    summary = compile_corpus(corpus, image_path)
    t_compile = time.perf_counter() - t0
    print(f"  {summary.total_bytes / 1e6:.1f} MB image in {t_compile:.1f}s")
    del corpus

    print("loading image ...")
    t0 = time.perf_counter()
    loaded = Corpus.from_file(image_path)
    n = loaded.stats().nodes
    t_load = time.perf_counter() - t0
    print(f"  {n} nodes in {t_load:.3f}s")

    print()
    print(f"ingest {t_ingest:.1f}s | compile {t_compile:.1f}s | load {t_load:.3f}s")
    print(f"load/ingest ratio: {t_load / t_ingest:.4f} (target <= 0.1)")


if __name__ == "__main__":
    main()
