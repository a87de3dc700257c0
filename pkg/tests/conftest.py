import pytest

from lexswap import synthetic as syn
from lexswap.data import split_dev_test
from lexswap.model import preset
from lexswap.pipeline import VocabConfig, build_source
from lexswap.training import TrainConfig

TINY_MODEL = preset("toy", seq_len=16, max_positions=16, hidden=16, heads=2, ffn=32)
TINY_VOCAB = VocabConfig(size=150, min_freq=5)
TINY_TRAIN = TrainConfig(lr0=3e-3, total_steps=20, batch_size=8, eval_every=10)


@pytest.fixture(scope="session")
def tiny_world():
    """A few-second source bundle plus target data; only for plumbing tests."""
    src = syn.make_language("src", seed=1)
    tgt = syn.derive(src, "tgt", 0.5, seed=2)
    corpus = syn.generate_corpus(src, 20_000, seed=3)
    tb = syn.generate_treebank(src, 40, seed=4)
    bundle = build_source(corpus, tb[:30], tb[30:], TINY_MODEL, TINY_VOCAB, TINY_TRAIN, TINY_TRAIN, 16)
    tdev, ttest = split_dev_test(syn.generate_treebank(tgt, 40, seed=5), 0.25, seed=6)
    return {
        "src": src,
        "tgt": tgt,
        "bundle": bundle,
        "target_corpus": syn.generate_corpus(tgt, 30_000, seed=7),
        "target_dev": tdev,
        "target_test": ttest,
    }


# criterion number -> (passed, one-line summary), filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, line = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {line}")
