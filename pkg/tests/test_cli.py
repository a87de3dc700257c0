import json
import subprocess
import sys

import pytest

from lexswap.checkpoint import load_checkpoint, read_header
from lexswap.cli import main
from lexswap.report import read_results

TRAIN = ["--steps", "10", "--eval-every", "5", "--batch-size", "8"]


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture(scope="module")
def world(tmp_path_factory):
    """Synthetic data plus one pass through the training commands."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    assert run("synth", "--out-dir", data, "--divergence", "0.5", "--size-mb", "0.03", "--sentences", "90") == 0
    src, tgt = data / "src", data / "tgt0"
    assert run("pretrain-source", "--out-dir", root / "source", "--corpus", src / "corpus.txt",
               "--vocab-size", "200", "--min-freq", "5", "--seq-len", "16", *TRAIN) == 0
    assert run("finetune-pos", "--out-dir", root / "ft", "--train", src / "train.conllu", "--dev", src / "dev.conllu",
               "--lexical", root / "source" / "lexical.ckpt", "--body", root / "source" / "body.ckpt",
               "--seq-len", "16", *TRAIN) == 0
    assert run("pretrain-lexical", "--out-dir", root / "lex", "--corpus", tgt / "corpus.txt",
               "--body", root / "source" / "body.ckpt", "--vocab-size", "200", "--min-freq", "5",
               "--seq-len", "16", *TRAIN) == 0
    return root


class TestPipelineCommands:
    def test_synth_layout(self, world):
        data = world / "data"
        assert {p.name for p in (data / "src").iterdir()} == {"corpus.txt", "train.conllu", "dev.conllu"}
        assert {p.name for p in (data / "tgt0").iterdir()} == {"corpus.txt", "dev.conllu", "test.conllu"}
        assert (data / "wordlists.tsv").exists()

    def test_training_outputs(self, world):
        assert sorted(p.name for p in (world / "ft").glob("body_step*.ckpt")) == [
            "body_step000005.ckpt", "body_step000010.ckpt"]
        assert read_header(world / "ft" / "body_step000005.ckpt")["provenance"]["step"] == 5
        assert len(list((world / "lex").glob("lexical_step*.ckpt"))) == 2
        lines = (world / "lex" / "metrics.tsv").read_text().splitlines()
        assert lines[0] == "step\tlr\tloss\tdev_metric" and len(lines) == 3

    def test_provenance(self, world):
        prov = json.loads((world / "ft" / "finetune-pos.provenance.json").read_text())
        assert prov["command"] == "finetune-pos"
        assert len(prov["inputs"]) == 4 and all(len(h) == 64 for h in prov["inputs"].values())
        ini = (world / "ft" / "finetune-pos.config.ini").read_text()
        assert "[finetune-pos]" in ini and "steps = 10" in ini

    def test_swap_and_evaluate(self, world, capsys):
        model = world / "model.ckpt"
        assert run("swap", "--out-dir", world / "sw", "--body", world / "ft" / "body.ckpt",
                   "--lexical", world / "lex" / "lexical.ckpt", "--out", model) == 0
        assert load_checkpoint(model).vocab == load_checkpoint(world / "lex" / "lexical.ckpt").vocab
        test = world / "data" / "tgt0" / "test.conllu"
        assert run("evaluate", "--out-dir", world / "ev1", "--test", test, "--model", model, "--seq-len", "16") == 0
        assert "accuracy" in capsys.readouterr().out
        acc1 = (world / "ev1" / "accuracy.tsv").read_text().splitlines()[1].split("\t")[-1]
        # the same pair given as files gives the same accuracy
        assert run("evaluate", "--out-dir", world / "ev2", "--test", test, "--body", world / "ft" / "body.ckpt",
                   "--lexical", world / "lex" / "lexical.ckpt", "--seq-len", "16") == 0
        assert (world / "ev2" / "accuracy.tsv").read_text().splitlines()[1].split("\t")[-1] == acc1

    def test_evaluate_directories(self, world):
        out = world / "ev3"
        assert run("evaluate", "--out-dir", out, "--test", world / "data" / "tgt0" / "test.conllu",
                   "--dev", world / "data" / "tgt0" / "dev.conllu", "--body", world / "ft",
                   "--lexical", world / "lex", "--seq-len", "16") == 0
        assert len((out / "combo_grid.tsv").read_text().splitlines()) == 1 + 2 * 2
        assert run("evaluate", "--out-dir", out, "--test", world / "data" / "tgt0" / "test.conllu",
                   "--body", world / "ft", "--lexical", world / "lex") == 1

    def test_ablate_with_config(self, world):
        cfg = world / "ablate.ini"
        cfg.write_text(
            "[common]\nseed = 0\n\n"
            f"[ablate]\ncorpus = {world / 'data' / 'tgt0' / 'corpus.txt'}\n"
            f"dev = {world / 'data' / 'tgt0' / 'dev.conllu'}\ntest = {world / 'data' / 'tgt0' / 'test.conllu'}\n"
            "sizes = 0.01,full\nvocab_size = 200\nmin_freq = 5\nseq_len = 16\npos_seq_len = 16\n"
            "steps = 10\neval_every = 5\nbatch_size = 8\n\n"
            f"[model:toy]\npretrained_body = {world / 'source' / 'body.ckpt'}\ntreebank.synth = {world / 'ft'}\n",
            encoding="utf-8")
        assert run("ablate", "--config", cfg, "--out-dir", world / "abl") == 0
        rows = read_results(world / "abl" / "ablation.tsv")
        assert [r.subset_size_mb for r in rows] == [0.01, "full"]
        for name in ("table2.tsv", "table2.md", "ablation.svg"):
            assert (world / "abl" / name).exists()
        assert run("report", "--out-dir", world / "rep", "--results", world / "abl" / "ablation.tsv",
                   "--layout", "table2") == 0
        assert (world / "rep" / "table2.md").read_text() == (world / "abl" / "table2.md").read_text()

    def test_lexical_restarts(self, world):
        out = world / "lex3"
        assert run("pretrain-lexical", "--out-dir", out, "--corpus", world / "data" / "tgt0" / "corpus.txt",
                   "--body", world / "source" / "body.ckpt", "--vocab", world / "lex" / "vocab.txt",
                   "--seq-len", "16", "--restarts", "2", *TRAIN) == 0
        assert "restarts = 2" in (out / "pretrain-lexical.config.ini").read_text()
        assert len(list(out.glob("lexical_step*.ckpt"))) == 2
        assert run("pretrain-lexical", "--out-dir", out, "--corpus", world / "data" / "tgt0" / "corpus.txt",
                   "--body", world / "source" / "body.ckpt", "--restarts", "0") == 1

    def test_langdist(self, world):
        acc = world / "acc.tsv"
        acc.write_text("src\t0.9\ntgt0\t0.5\n", encoding="utf-8")
        assert run("langdist", "--out-dir", world / "ld", "--wordlists", world / "data" / "wordlists.tsv") == 0
        assert (world / "ld" / "ldnd.tsv").exists() and (world / "ld" / "mds.svg").exists()
        # two languages: correlation needs three points, reported as an input error
        assert run("langdist", "--out-dir", world / "ld", "--wordlists", world / "data" / "wordlists.tsv",
                   "--accuracies", acc, "--reference", "src") == 1


class TestConfigAndErrors:
    def test_no_args_is_usage_error(self, capsys):
        assert main([]) == 2
        assert "usage" in capsys.readouterr().err

    def test_unknown_flag(self):
        assert main(["swap", "--bogus"]) == 2

    def test_missing_required(self, capsys, tmp_path):
        assert main(["swap", "--out-dir", str(tmp_path)]) == 1
        assert "--body" in capsys.readouterr().err

    def test_missing_file(self, capsys, tmp_path):
        assert main(["train-vocab", "--out-dir", str(tmp_path), "--corpus", str(tmp_path / "nope")]) == 1
        assert "does not exist" in capsys.readouterr().err

    def test_config_unknown_key(self, tmp_path, capsys):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[train-vocab]\nsise = 10\n")
        assert main(["train-vocab", "--config", str(cfg)]) == 1
        assert "sise" in capsys.readouterr().err

    def test_config_bad_value_and_choice(self, tmp_path):
        cfg = tmp_path / "c.ini"
        cfg.write_text("[train-vocab]\nsize = ten\n")
        assert main(["train-vocab", "--config", str(cfg)]) == 1
        cfg.write_text("[report]\nlayout = table9\n")
        assert main(["report", "--config", str(cfg)]) == 1

    def test_flags_override_config(self, tmp_path):
        corpus = tmp_path / "c.txt"
        corpus.write_text("ab ab ab\n\nab ab\n")
        cfg = tmp_path / "c.ini"
        cfg.write_text(f"[train-vocab]\ncorpus = {corpus}\nsize = 6\nmin_freq = 1\n")
        assert main(["train-vocab", "--config", str(cfg), "--size", "50", "--out-dir", str(tmp_path)]) == 0
        assert "size = 50" in (tmp_path / "train-vocab.config.ini").read_text()

    def test_env_output_dir(self, tmp_path, monkeypatch):
        corpus = tmp_path / "c.txt"
        corpus.write_text("ab ab ab\n")
        monkeypatch.setenv("LEXSWAP_OUTPUT_DIR", str(tmp_path / "envout"))
        assert main(["train-vocab", "--corpus", str(corpus), "--size", "10", "--min-freq", "1"]) == 0
        assert (tmp_path / "envout" / "vocab.txt").exists()

    def test_module_entry_point(self):
        proc = subprocess.run([sys.executable, "-m", "lexswap", "--version"], capture_output=True, text=True)
        assert proc.returncode == 0 and proc.stdout.startswith("lexswap ")
