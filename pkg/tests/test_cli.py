import json

import pytest

from fabric.cli import main


@pytest.fixture(scope="module")
def tree(tmp_path_factory):
    from fabric.compiler import compile_corpus
    from fabric.synth import toy4, write_graf, write_tabular

    root = tmp_path_factory.mktemp("cli")
    logical = toy4()
    graf = root / "graf"
    tabular = root / "tabular"
    graf.mkdir()
    tabular.mkdir()
    write_graf(logical, graf, stem="toy4")
    write_tabular(logical, tabular)
    compile_corpus(logical, root / "toy4.fab")
    return root


@pytest.fixture()
def image(tree):
    return str(tree / "toy4.fab")


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestExitCodes:
    def test_pinned_codes(self, tree, image, capsys, golden):
        want = golden("toy4_cli.json")["exit_codes"]
        ok, _, _ = run(capsys, "info", image)
        assert ok == want["ok"]
        user, _, _ = run(capsys, "query", image, "-q", "[nope]")
        assert user == want["user_error"]
        bad = tree / "bad.fab"
        data = bytearray((tree / "toy4.fab").read_bytes())
        data[-1] ^= 0xFF
        bad.write_bytes(bytes(data))
        corrupt, _, err = run(capsys, "info", str(bad))
        assert corrupt == want["corrupt"]
        assert "corrupt image" in err

    def test_missing_image_is_a_user_error(self, capsys, tree):
        code, _, err = run(capsys, "info", str(tree / "absent.fab"))
        assert code == 1
        assert "not found" in err

    def test_usage_error_is_exit_one(self, capsys, image):
        code = main(["query", image])  # neither -q nor -f
        capsys.readouterr()
        assert code == 1

    def test_conflicting_query_sources(self, capsys, image):
        code = main(["query", image, "-q", "[word]", "-f", "x"])
        capsys.readouterr()
        assert code == 1

    def test_help_exits_zero(self, capsys):
        assert main(["--help"]) == 0
        capsys.readouterr()


class TestCompile:
    def test_compile_graf(self, tree, capsys, tmp_path):
        out = tmp_path / "out.fab"
        code, stdout, _ = run(capsys, "compile", str(tree / "graf" / "toy4.graf"), str(out))
        assert code == 0
        assert out.read_bytes() == (tree / "toy4.fab").read_bytes()
        assert "4 words" in stdout and "8 nodes" in stdout

    def test_compile_tabular_directory(self, tree, capsys, tmp_path):
        out = tmp_path / "out.fab"
        code, _, _ = run(capsys, "compile", str(tree / "tabular"), str(out))
        assert code == 0
        assert out.read_bytes() == (tree / "toy4.fab").read_bytes()

    def test_compile_json_format(self, tree, capsys, tmp_path):
        out = tmp_path / "out.fab"
        code, stdout, _ = run(
            capsys, "compile", str(tree / "graf" / "toy4.graf"), str(out), "--format", "json"
        )
        assert code == 0
        doc = json.loads(stdout)
        assert doc["stats"] == {"words": 4, "nodes": 8, "edges": 0, "features": 10}
        assert doc["bytes"] == out.stat().st_size

    def test_validation_failures_list_every_issue(self, capsys, tmp_path):
        src = tmp_path / "bad"
        src.mkdir()
        (src / "text.txt").write_text("ab cd", encoding="utf-8")
        (src / "slots.tsv").write_text(
            "slot_index\tstart\tend\n1\t0\t2\n2\t3\t9\n", encoding="utf-8"
        )
        (src / "nodes.tsv").write_text(
            "node_id\totype\tmonadset\nn1\tword\t1\n", encoding="utf-8"
        )
        (src / "features.tsv").write_text("kind\ttarget_id\tkey\tvalue\n", encoding="utf-8")
        code, _, err = run(capsys, "compile", str(src), str(tmp_path / "x.fab"))
        assert code == 1
        assert "REGION_BOUNDS" in err and "MISSING_SLOT_NODE" in err

    def test_validation_failures_as_json(self, capsys, tmp_path):
        src = tmp_path / "bad"
        src.mkdir()
        (src / "text.txt").write_text("ab", encoding="utf-8")
        (src / "slots.tsv").write_text("slot_index\tstart\tend\n", encoding="utf-8")
        (src / "nodes.tsv").write_text("node_id\totype\tmonadset\n", encoding="utf-8")
        (src / "features.tsv").write_text("kind\ttarget_id\tkey\tvalue\n", encoding="utf-8")
        code, _, err = run(
            capsys, "compile", str(src), str(tmp_path / "x.fab"), "--format", "json"
        )
        assert code == 1
        doc = json.loads(err)
        assert doc["error"] == "validation failed"
        assert any(i["code"] == "NO_SLOTS" for i in doc["issues"])


class TestInfo:
    def test_text(self, image, capsys):
        code, stdout, _ = run(capsys, "info", image)
        assert code == 0
        assert "words:        4" in stdout
        assert "verse" in stdout

    def test_json_subset(self, image, capsys, golden):
        want = golden("toy4_cli.json")["info_json_subset"]
        code, stdout, _ = run(capsys, "info", image, "--format", "json")
        assert code == 0
        doc = json.loads(stdout)
        for key, value in want.items():
            assert doc[key] == value
        assert doc["otypes"][-1] == "word"
        assert len(doc["fingerprint"]) == 64

    def test_tsv(self, image, capsys):
        code, stdout, _ = run(capsys, "info", image, "--format", "tsv")
        assert code == 0
        rows = dict(line.split("\t") for line in stdout.splitlines())
        assert rows == {"words": "4", "nodes": "8", "edges": "0", "features": "10"}


class TestQuery:
    def test_pinned_tsv(self, image, capsys, golden):
        want = golden("toy4_cli.json")["query_fox_tsv"]
        code, stdout, _ = run(
            capsys, "query", image, "-q", '[word lex="fox"]', "--format", "tsv"
        )
        assert code == 0
        assert stdout.splitlines() == want

    def test_text_output(self, image, capsys):
        code, stdout, _ = run(capsys, "query", image, "-q", '[word lex="fox"]')
        assert code == 0
        assert "match 1 @ n301" in stdout
        assert "n3=word" in stdout and "'fox'" in stdout
        assert stdout.splitlines()[-1] == "1 match(es)"

    def test_json_lines(self, image, capsys):
        code, stdout, _ = run(
            capsys, "query", image, "-q", "[word][word]", "--format", "json"
        )
        assert code == 0
        lines = [json.loads(line) for line in stdout.splitlines()]
        assert [m["match"] for m in lines] == [1, 2, 3]
        assert lines[0]["nodes"][0] == {
            "path": "1", "id": 1, "otype": "word", "passage": "n301",
        }

    def test_nested_paths(self, image, capsys):
        code, stdout, _ = run(
            capsys, "query", image, "-q", "[verse [clause [phrase]]]", "--format", "tsv"
        )
        assert code == 0
        paths = [line.split("\t")[1] for line in stdout.splitlines()]
        assert paths == ["1", "1.1", "1.1.1", "1", "1.1", "1.1.1"]

    def test_limit(self, image, capsys):
        code, stdout, _ = run(capsys, "query", image, "-q", "[word]", "--limit", "2")
        assert code == 0
        assert stdout.splitlines()[-1] == "2 match(es) (limit reached)"

    def test_query_file(self, image, capsys, tmp_path):
        qfile = tmp_path / "q.fql"
        qfile.write_text('[word lex="fox"] // comment\n', encoding="utf-8")
        code, stdout, _ = run(capsys, "query", image, "-f", str(qfile), "--format", "tsv")
        assert code == 0
        assert stdout.splitlines() == ["1\t1\tn3\tword\tn301"]

    def test_missing_query_file(self, image, capsys):
        code, _, err = run(capsys, "query", image, "-f", "absent.fql")
        assert code == 1
        assert "query file not found" in err

    def test_syntax_error_reports_position(self, image, capsys):
        code, _, err = run(capsys, "query", image, "-q", "[word][word")
        assert code == 1
        assert "line 1, column 12" in err

    def test_json_error_envelope(self, image, capsys):
        code, _, err = run(
            capsys, "query", image, "-q", "[nope]", "--format", "json"
        )
        assert code == 1
        doc = json.loads(err)
        assert "unknown otype" in doc["error"]
        assert doc["exit"] == 1


class TestRepl:
    def feed(self, monkeypatch, lines):
        it = iter(lines)

        def fake_input(prompt=""):
            try:
                return next(it)
            except StopIteration:
                raise EOFError

        monkeypatch.setattr("builtins.input", fake_input)

    def test_query_loop(self, image, capsys, monkeypatch):
        self.feed(monkeypatch, ['[word lex="fox"]', ":quit"])
        code, stdout, err = run(capsys, "repl", image)
        assert code == 0
        assert "loaded" in err
        assert "match 1" in stdout

    def test_eof_ends_cleanly(self, image, capsys, monkeypatch):
        self.feed(monkeypatch, [])
        assert run(capsys, "repl", image)[0] == 0

    def test_errors_do_not_end_the_loop(self, image, capsys, monkeypatch):
        self.feed(monkeypatch, ["[nope]", '[word lex="fox"]', ":quit"])
        code, stdout, err = run(capsys, "repl", image)
        assert code == 0
        assert "unknown otype" in err
        assert "match 1" in stdout

    def test_limit_command(self, image, capsys, monkeypatch):
        self.feed(monkeypatch, [":limit 2", "[word]", ":limit off", "[word]", ":quit"])
        code, stdout, _ = run(capsys, "repl", image)
        assert code == 0
        assert "2 match(es) (limit reached)" in stdout
        assert "4 match(es)" in stdout

    def test_explain_command(self, image, capsys, monkeypatch):
        self.feed(monkeypatch, [":explain [word]", ":quit"])
        code, stdout, _ = run(capsys, "repl", image)
        assert code == 0
        assert "otype scan" in stdout

    def test_load_command(self, image, capsys, monkeypatch, tree):
        self.feed(monkeypatch, [":load " + image, '[word lex="fox"]', ":quit"])
        code, stdout, err = run(capsys, "repl", image)
        assert code == 0
        assert err.count("loaded") == 2
        assert "match 1" in stdout

    def test_unknown_command(self, image, capsys, monkeypatch):
        self.feed(monkeypatch, [":bogus", ":quit"])
        code, _, err = run(capsys, "repl", image)
        assert code == 0
        assert "unknown command" in err


class TestFeatures:
    def test_writes_docs(self, image, capsys, tmp_path):
        out = tmp_path / "docs"
        code, stdout, _ = run(capsys, "features", image, str(out))
        assert code == 0
        assert (out / "index.json").exists()
        assert (out / "word.lex.txt").exists()
        assert "wrote" in stdout

    def test_json_format_lists_files(self, image, capsys, tmp_path):
        out = tmp_path / "docs"
        code, stdout, _ = run(capsys, "features", image, str(out), "--format", "json")
        assert code == 0
        doc = json.loads(stdout)
        assert "index.json" in doc["files"]


class TestAnnotate:
    def test_save_list_margin_page(self, image, capsys, tmp_path):
        store = str(tmp_path / "store.json")

        code, stdout, _ = run(
            capsys, "annotate", image, store, "save",
            "-q", '[word lex="fox"]', "--name", "fox-query", "--author", "ada",
        )
        assert code == 0
        assert "1 match(es) in 1 verse(s)" in stdout

        code, stdout, _ = run(capsys, "annotate", image, store, "list")
        assert code == 0
        assert "fox-query" in stdout and "public" in stdout

        code, stdout, _ = run(
            capsys, "annotate", image, store, "margin", "--passage", "n301"
        )
        assert code == 0
        assert "ada/fox-query" in stdout and "n3" in stdout

        code, stdout, _ = run(
            capsys, "annotate", image, store, "page", "--id", "1"
        )
        assert code == 0
        assert "page 1/1" in stdout
        assert "n301: n3" in stdout

    def test_store_file_is_canonical(self, image, capsys, tmp_path):
        from fabric.annotations import export_bytes, import_store
        from fabric.corpus import Corpus

        store_path = tmp_path / "store.json"
        run(
            capsys, "annotate", image, str(store_path), "save",
            "-q", "[word]", "--name", "w", "--author", "ada",
        )
        corpus = Corpus.from_file(image)
        assert export_bytes(import_store(store_path, corpus)) == store_path.read_bytes()

    def test_duplicate_save_fails(self, image, capsys, tmp_path):
        store = str(tmp_path / "store.json")
        args = (
            "annotate", image, store, "save",
            "-q", "[word]", "--name", "w", "--author", "ada",
        )
        assert run(capsys, *args)[0] == 0
        code, _, err = run(capsys, *args)
        assert code == 1
        assert "already has" in err

    def test_private_saves_and_filters(self, image, capsys, tmp_path):
        store = str(tmp_path / "store.json")
        run(
            capsys, "annotate", image, store, "save",
            "-q", "[word]", "--name", "mine", "--author", "ada", "--private",
        )
        code, stdout, _ = run(
            capsys, "annotate", image, store, "margin",
            "--passage", "301", "--format", "json",
        )
        assert code == 0
        assert json.loads(stdout)[0]["name"] == "mine"
        code, stdout, _ = run(
            capsys, "annotate", image, store, "margin",
            "--passage", "301", "--public-only", "--format", "json",
        )
        assert code == 0
        assert json.loads(stdout) == []

    def test_margin_on_non_passage_node(self, image, capsys, tmp_path):
        store = str(tmp_path / "store.json")
        code, _, err = run(
            capsys, "annotate", image, store, "margin", "--passage", "n3"
        )
        assert code == 1
        assert "not a verse" in err

    def test_page_unknown_id(self, image, capsys, tmp_path):
        store = str(tmp_path / "store.json")
        code, _, err = run(capsys, "annotate", image, store, "page", "--id", "9")
        assert code == 1
        assert "no saved query" in err

    def test_page_json(self, image, capsys, tmp_path):
        store = str(tmp_path / "store.json")
        run(
            capsys, "annotate", image, store, "save",
            "-q", '[word lex="fox"]', "--name", "fox", "--author", "ada",
        )
        code, stdout, _ = run(
            capsys, "annotate", image, store, "page", "--id", "1", "--format", "json"
        )
        assert code == 0
        doc = json.loads(stdout)
        assert doc["page"] == 1 and doc["total_pages"] == 1
        assert doc["entries"] == [{"verse": 301, "nodes": [3]}]
