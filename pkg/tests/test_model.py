import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lexswap.model import (
    AssembledModel,
    LexicalLayer,
    TransformerBody,
    count_parameters,
    forward_mlm,
    forward_pos,
    preset,
    set_trainable,
    swap_lexical,
)
from lexswap.numcore import IGNORE_LABEL, grad_check_detail
from lexswap.tokenizer import PAD_ID, SPECIALS, Vocabulary


def make_vocab(n):
    return Vocabulary(list(SPECIALS) + [f"t{i}" for i in range(n - len(SPECIALS))])


@pytest.fixture(scope="module")
def small():
    cfg = preset("toy", vocab_size=50, seq_len=16, max_positions=16)
    vocab = make_vocab(50)
    return cfg, vocab, TransformerBody.init(cfg, seed=0), LexicalLayer.init(vocab, cfg.hidden, seed=1)


def random_ids(rng, b, t, v):
    return rng.integers(5, v, size=(b, t))


class TestShapes:
    def test_toy_default_seq_len(self):
        cfg = preset("toy")
        vocab = make_vocab(cfg.vocab_size)
        ids = np.random.default_rng(0).integers(5, cfg.vocab_size, size=(2, 128))
        body, lex = TransformerBody.init(cfg), LexicalLayer.init(vocab, cfg.hidden)
        assert forward_mlm(lex, body, ids).shape == (2, 128, cfg.vocab_size)
        assert forward_pos(lex, body, ids).shape == (2, 128, 16)

    def test_id_out_of_range(self, small):
        _, vocab, body, lex = small
        with pytest.raises(ValueError, match="out of range"):
            forward_mlm(lex, body, [[0, len(vocab)]])

    def test_too_long(self, small):
        _, _, body, lex = small
        with pytest.raises(ValueError, match="max_positions"):
            forward_pos(lex, body, np.full((1, 17), 5))


class TestBehaviour:
    def test_zero_model_uniform_loss(self, small):
        cfg, vocab, _, _ = small
        body = TransformerBody.init(cfg)
        lex = LexicalLayer.init(vocab, cfg.hidden)
        for store in (body.store, lex.store):
            for _, p in store.items():
                p.value[...] = 0.0
        model = swap_lexical(body, lex)
        ids = np.random.default_rng(0).integers(5, 50, size=(3, 16))
        logits = model.forward_mlm(ids)
        assert np.all(logits == logits[..., :1])
        labels = ids.copy()
        assert model.mlm_loss(ids, labels) == pytest.approx(math.log(len(vocab)), abs=1e-5)

    def test_identical_rows(self, small):
        _, _, body, lex = small
        row = np.random.default_rng(1).integers(5, 50, size=16)
        out = forward_mlm(lex, body, np.stack([row, row]))
        np.testing.assert_array_equal(out[0], out[1])

    def test_pure(self, small):
        _, _, body, lex = small
        ids = np.random.default_rng(2).integers(5, 50, size=(2, 16))
        np.testing.assert_array_equal(forward_pos(lex, body, ids), forward_pos(lex, body, ids))

    def test_batch_permutation(self, small):
        _, _, body, lex = small
        ids = np.random.default_rng(3).integers(5, 50, size=(4, 16))
        perm = [2, 0, 3, 1]
        np.testing.assert_allclose(forward_pos(lex, body, ids)[perm], forward_pos(lex, body, ids[perm]),
                                   rtol=0, atol=1e-6)

    def test_pad_only_contributes_nothing(self, small):
        _, _, body, lex = small
        model = swap_lexical(body, lex)
        ids = np.random.default_rng(4).integers(5, 50, size=(2, 16))
        ids[1] = PAD_ID
        labels = np.full(ids.shape, IGNORE_LABEL)
        labels[0, :5] = 3
        alone = model.pos_loss(ids[:1], labels[:1])
        assert model.pos_loss(ids, labels) == pytest.approx(alone, rel=1e-6)

    def test_pad_keys_masked(self, small):
        _, _, body, lex = small
        a = np.full((1, 16), PAD_ID)
        a[0, :6] = np.arange(5, 11)
        b = a.copy()
        b[0, 6:] = PAD_ID
        out_a = forward_pos(lex, body, a)[0, :6]
        # changing the embedding of PAD must not affect real positions
        lex2 = lex.copy()
        lex2.embedding.value[PAD_ID] += 1.0
        out_b = forward_pos(lex2, body, b)[0, :6]
        np.testing.assert_allclose(out_a, out_b, atol=1e-5)


class TestTyingAndSwap:
    def test_single_tensor(self, small):
        _, _, body, lex = small
        model = swap_lexical(body, lex)
        names = model.store.names()
        assert [n for n in names if n.startswith("lexical.")] == ["lexical.embedding", "lexical.output_bias"]
        assert not any("decoder" in n or "output.weight" in n and "attn" not in n for n in names)

    def test_perturb_row_shifts_both_pathways(self, small):
        _, _, body, lex = small
        lex = lex.copy()
        model = swap_lexical(body, lex)
        k = 7
        ids_without = np.full((1, 16), 9)
        ids_with = ids_without.copy()
        ids_with[0, 3] = k
        before_in = model.forward_pos(ids_with)
        before_out = model.forward_mlm(ids_without)
        # a random direction: a constant shift would be cancelled by the embedding layer norm
        lex.embedding.value[k] += np.random.default_rng(0).normal(0, 0.5, lex.embedding.value.shape[1])
        after_in = model.forward_pos(ids_with)
        after_out = model.forward_mlm(ids_without)
        # input pathway: the sequence containing k changes
        assert np.abs(after_in - before_in).max() > 1e-4
        # output pathway: only the logit column of k changes for a sequence without k
        diff = np.abs(after_out - before_out)
        assert diff[..., k].max() > 1e-4
        assert np.delete(diff, k, axis=-1).max() == 0.0

    def test_swap_identity_and_back(self, small):
        cfg, _, body, lex = small
        ids = np.random.default_rng(5).integers(5, 40, size=(2, 16))
        original = forward_mlm(lex, body, ids)
        np.testing.assert_array_equal(swap_lexical(body, lex).forward_mlm(ids), original)
        other = LexicalLayer.init(make_vocab(40), cfg.hidden, seed=9)
        swapped = swap_lexical(body, other)
        assert swapped.forward_mlm(ids).shape[-1] == 40
        assert swapped.config.vocab_size == 40
        np.testing.assert_array_equal(swap_lexical(body, lex).forward_mlm(ids), original)

    def test_swap_different_vocab_size(self):
        cfg = preset("toy", vocab_size=300, seq_len=16, max_positions=16)
        body = TransformerBody.init(cfg)
        lex = LexicalLayer.init(make_vocab(100), cfg.hidden)
        ids = np.random.default_rng(0).integers(5, 100, size=(1, 16))
        assert forward_mlm(lex, body, ids).shape == (1, 16, 100)

    def test_hidden_mismatch_names_both(self, small):
        _, _, body, _ = small
        lex = LexicalLayer.init(make_vocab(50), 32)
        with pytest.raises(ValueError, match="32.*64"):
            swap_lexical(body, lex)

    def test_swap_does_not_touch_body(self, small):
        _, _, body, lex = small
        snap = {n: p.value.copy() for n, p in body.store.items()}
        swap_lexical(body, LexicalLayer.init(make_vocab(20), 64)).forward_mlm(np.full((1, 16), 6))
        for n, p in body.store.items():
            np.testing.assert_array_equal(p.value, snap[n])


class TestSetTrainable:
    @pytest.mark.parametrize("selector", ["lexical-only", "body-only", "all"])
    def test_groups(self, small, selector):
        _, _, body, lex = small
        model = swap_lexical(body, lex)
        set_trainable(model.store, selector)
        for name, p in model.store.items():
            is_lex = name.startswith("lexical.")
            expected = selector == "all" or (is_lex if selector == "lexical-only" else not is_lex)
            assert p.trainable == expected, name
        set_trainable(model.store, "all")

    def test_bad_selector(self, small):
        with pytest.raises(ValueError):
            set_trainable(small[2].store, "nothing")


class TestCountParameters:
    def test_toy_hand_count(self):
        v, h, f, t, p = 2000, 64, 256, 16, 128
        lexical = v * h + v
        layer = 4 * (h * h + h) + 2 * h + (h * f + f) + (f * h + h) + 2 * h
        body = p * h + 2 * h + 2 * layer + (h * h + h) + 2 * h + (h * t + t)
        assert (lexical, body) == (130_000, 113_616)
        assert count_parameters(preset("toy")) == (243_616, 130_000)

    def test_toy_matches_stores(self):
        cfg = preset("toy")
        body = TransformerBody.init(cfg)
        lex = LexicalLayer.init(make_vocab(cfg.vocab_size), cfg.hidden)
        total, lexical = count_parameters(cfg)
        assert lexical == lex.store.num_elements()
        assert total == lexical + body.store.num_elements()

    def test_bert_base(self):
        total, lexical = count_parameters(preset("bert-base"))
        assert abs(total - 110e6) / 110e6 < 0.05
        assert abs(lexical - 24e6) / 24e6 < 0.05

    def test_mbert_lexical(self):
        _, lexical = count_parameters(preset("mbert-base"))
        assert abs(lexical - 92e6) / 92e6 < 0.02

    def test_bad_config(self):
        with pytest.raises(ValueError):
            preset("toy", heads=5)
        with pytest.raises(ValueError):
            preset("nope")


class TestGradients:
    @pytest.mark.parametrize("head", ["mlm", "pos"])
    def test_grad_check_small_model(self, head):
        cfg = preset("toy", vocab_size=30, seq_len=8, max_positions=8, hidden=16, heads=2, ffn=32)
        rng = np.random.default_rng(0)
        model = AssembledModel(LexicalLayer.init(make_vocab(30), 16, seed=1, std=0.5), TransformerBody.init(cfg, 2))
        for name, p in model.store.items():
            if not name.endswith("gain"):
                p.value[...] = rng.normal(0, 0.3, p.value.shape)
        ids = rng.integers(5, 30, size=(2, 8))
        ids[1, 6:] = PAD_ID
        labels = np.full(ids.shape, IGNORE_LABEL)
        if head == "mlm":
            labels[0, [1, 4]] = ids[0, [1, 4]]
            labels[1, 2] = ids[1, 2]
            fn = model.mlm_loss
        else:
            labels[:, :6] = rng.integers(0, 16, size=(2, 6))
            fn = model.pos_loss
        set_trainable(model.store, "all")

        def loss(backward):
            model.store.zero_grad()
            return fn(ids, labels, backward=backward)

        detail = grad_check_detail(loss, model.store, eps=1e-3, samples=6)
        used = {n for n in detail if not (head == "mlm" and "pos_head" in n) and not (head == "pos" and "mlm" in n)}
        assert max(detail[n] for n in used) < 1e-2, {n: detail[n] for n in used if detail[n] >= 1e-2}

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 1000))
    def test_frozen_groups_get_no_grad(self, seed):
        cfg = preset("toy", vocab_size=30, seq_len=8, max_positions=8, hidden=16, heads=2, ffn=32)
        model = swap_lexical(TransformerBody.init(cfg, seed), LexicalLayer.init(make_vocab(30), 16, seed=seed))
        set_trainable(model.store, "lexical-only")
        model.store.zero_grad()
        ids = np.random.default_rng(seed).integers(5, 30, size=(2, 8))
        model.mlm_loss(ids, ids, backward=True)
        for name, p in model.store.items():
            assert (p.grad is not None) == name.startswith("lexical."), name
        set_trainable(model.store, "all")
