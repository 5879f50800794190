import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from eedgcnn.config import ModelConfig
from eedgcnn.corpus import EventAnnotation, Sentence, two_event_example
from eedgcnn.tensor import Tape
from eedgcnn.features import (Featurizer, Query, build_classifier_input, build_pos_vocab, compose_tokens,
                              trigger_rows, window_rows)

SMALL = dict(d_ctx=6, d_pos=3, d_event=5, hash_buckets=97)


def featurizer(**kw):
    cfg = ModelConfig(**{**SMALL, **kw})
    sent = two_event_example()
    return Featurizer(cfg, build_pos_vocab([sent]), ["Attack", "Die"])


def test_token_dim_trigger_task():
    f = featurizer(task="trigger", d_ctx=8, d_pos=4)
    assert f.d_token == 13
    assert compose_tokens(two_event_example(), None, f).shape == (16, 13)


def test_token_dim_wide_argument_task():
    f = featurizer(task="argument", d_ctx=768, d_pos=50, event_type_mode="learnable", d_event=400, hash_buckets=11)
    assert f.d_token == 1219


def test_token_dim_one_hot_and_none():
    assert featurizer(event_type_mode="one_hot").d_token == 6 + 3 + 2 + 1
    assert featurizer(event_type_mode="none").d_token == 6 + 3 + 1
    assert featurizer(features="simple").d_token == 6 + 1
    assert featurizer(segment_encoding="table", d_segment=4).d_token == 6 + 3 + 5 + 4


def test_event_type_changes_every_position():
    sent = two_event_example()
    f = featurizer(event_type_mode="learnable")
    a = compose_tokens(sent, EventAnnotation((10, 10), "Attack"), f)
    b = compose_tokens(sent, EventAnnotation((10, 10), "Die"), f)
    assert a.shape == b.shape
    assert np.all(np.any(a != b, axis=1))


@pytest.mark.parametrize("form", ["pair", "single"])
def test_no_event_type_is_blind_to_type(form):
    sent = two_event_example()
    f = featurizer(event_type_mode="none", input_form=form)
    a = compose_tokens(sent, EventAnnotation((10, 10), "Attack"), f)
    b = compose_tokens(sent, EventAnnotation((10, 10), "Die"), f)
    assert np.array_equal(a, b)


def test_single_form_segments_sum_to_zero():
    f = featurizer(input_form="single")
    lay = f.layout([Query(two_event_example(), EventAnnotation((5, 5), "Die"))])
    assert lay.segments.sum() == 0
    # prefix is the trigger token, no separator
    assert lay.sequences[0][:2] == ["died", "In"]


def test_pair_form_layout():
    f = featurizer(input_form="pair")
    lay = f.layout([Query(two_event_example(), EventAnnotation((13, 14), "Die"))])
    assert lay.sequences[0][:3] == ["Palestine", "Hotel", "[SEP]"]
    assert lay.offsets[0] == 3
    assert lay.segments[0, :3].tolist() == [0, 0, 0]
    assert lay.segments[0, 3:19].sum() == 16


def test_unknown_pos_maps_to_unk():
    f = featurizer()
    sent = Sentence("u", ["x", "y"], ["ZZZ", "NNP"], [])
    lay = f.layout([Query(sent, EventAnnotation((0, 0), "Die"))])
    assert lay.pos_ids[0, 2] == 0


def test_window_left_pad_at_start():
    hidden = np.arange(12.0).reshape(4, 3) + 1
    ci = build_classifier_input(hidden, 0, (2, 2))
    assert ci.candidate_embed[0].tolist() == [0.0, 0.0, 0.0]
    assert ci.candidate_embed[1].tolist() == hidden[0].tolist()
    assert ci.candidate_embed[2].tolist() == hidden[1].tolist()


def test_single_token_trigger_pads_slots():
    hidden = np.arange(12.0).reshape(4, 3) + 1
    ci = build_classifier_input(hidden, 1, (3, 3), trigger_slots=3)
    assert ci.trigger_embed[0].tolist() == hidden[3].tolist()
    assert np.all(ci.trigger_embed[1:] == 0)


def test_classifier_input_hand_assembled():
    hidden = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0], [7.0, 8.0], [9.0, 10.0]])
    # two prefix rows precede the three sentence rows
    ci = build_classifier_input(hidden, 2, (0, 1), window=3, trigger_slots=3, offset=2)
    assert ci.vector.tolist() == [5, 6, 7, 8, 0, 0, 7, 8, 9, 10, 0, 0]


def test_long_trigger_truncates():
    assert trigger_rows((4, 9), 3) == [4, 5, 6]
    assert window_rows(0, 5, 3) == [-1, -1, 0, 1, 2]
    with pytest.raises(ValueError):
        trigger_rows((3, 2), 3)


words = st.text(alphabet="abcdefg", min_size=1, max_size=5)


@st.composite
def sentences(draw):
    n = draw(st.integers(1, 12))
    toks = draw(st.lists(words, min_size=n, max_size=n))
    pos = draw(st.lists(st.sampled_from(["NN", "VBD", "DT", "XX"]), min_size=n, max_size=n))
    s = draw(st.integers(0, n - 1))
    e = draw(st.integers(s, min(n - 1, s + 3)))
    return Sentence("h", toks, pos, []), EventAnnotation((s, e), draw(st.sampled_from(["Attack", "Die"])))


@settings(max_examples=40, deadline=None)
@given(st.lists(sentences(), min_size=1, max_size=4), st.sampled_from(["pair", "single"]))
def test_dims_stable_across_batch(batch, form):
    f = featurizer(input_form=form)
    lay = f.layout([Query(s, ev) for s, ev in batch])
    x = f.compose(Tape(training=False), lay)
    assert x.shape[-1] == f.d_token
    for b, (s, ev) in enumerate(batch):
        L = lay.seq_lens[b]
        assert L == len(s.tokens) + (ev.trigger_span[1] - ev.trigger_span[0] + 1) + (form == "pair")
        hidden = np.random.default_rng(b).normal(size=(L, 4))
        for t in range(len(s.tokens)):
            ci = build_classifier_input(hidden, t, ev.trigger_span, offset=lay.offsets[b])
            assert ci.vector.shape == ((3 + 3) * 4,)
        if form == "single":
            assert lay.segments[b].sum() == 0
