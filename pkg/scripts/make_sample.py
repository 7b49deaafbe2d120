#!/usr/bin/env python3
"""Emit the four-word sample corpus in every supported form.

Writes the graph XML form, the tabular form, and the compiled image into
a target directory, ready for the CLI:

    python scripts/make_sample.py out/
    fabric query out/toy4.fab -q '[word lex="fox"]'
"""

from __future__ import annotations

import argparse
from pathlib import Path

from fabric.compiler import compile_corpus
from fabric.synth import toy4, write_graf, write_tabular


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("out_dir", type=Path)
    args = parser.parse_args()

    corpus = toy4()
    header = write_graf(corpus, args.out_dir, stem="toy4")
    tab_dir = write_tabular(corpus, args.out_dir / "toy4-tabular")
    summary = compile_corpus(corpus, args.out_dir / "toy4.fab")
    print(f"wrote {header}")
    print(f"wrote {tab_dir}/ (tabular)")
    print(f"wrote {args.out_dir / 'toy4.fab'} ({summary.total_bytes} bytes)")


if __name__ == "__main__":
    main()
