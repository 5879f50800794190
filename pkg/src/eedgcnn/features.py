"""Per-token input features and per-position classifier inputs.

Token feature = contextual vector ++ POS embedding ++ event-type encoding
++ segment id.  In the argument task the trigger tokens are prefixed to the
sentence: directly in ``single`` input form (all segment ids 0), or followed
by a separator in ``pair`` form (prefix and separator 0, sentence tokens 1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig, derive_rng
from .corpus import CorpusError, EventAnnotation, Sentence
from .layers import Embedding, Module
from .providers import SEP_TOKEN, assemble, make_provider
from .tensor import Tape, Tensor

UNK_POS = "<UNK>"
SEP_POS = "[SEP]"


@dataclass
class Query:
    """One tagging request: a sentence, plus the trigger for argument tagging."""

    sentence: Sentence
    event: EventAnnotation | None = None


@dataclass
class Layout:
    """Padded batch geometry and integer features for a list of queries."""

    queries: list
    sequences: list          # assembled token strings per query
    seq_lens: np.ndarray     # [B] length of prefix + separator + sentence
    offsets: np.ndarray      # [B] index of the first sentence token
    sent_lens: np.ndarray    # [B]
    pos_ids: np.ndarray      # [B, L]
    segments: np.ndarray     # [B, L]
    event_ids: np.ndarray    # [B]
    valid: np.ndarray        # [B, L] 1.0 where a real position exists

    @property
    def width(self) -> int:
        return self.valid.shape[1]


def build_pos_vocab(sentences) -> list[str]:
    tags = sorted({p for s in sentences for p in s.pos} - {UNK_POS, SEP_POS})
    return [UNK_POS, SEP_POS] + tags


class Featurizer(Module):
    def __init__(self, config: ModelConfig, pos_tags, event_types, provider=None):
        self.config = config
        self.pos_tags = list(pos_tags)
        self.pos_index = {t: i for i, t in enumerate(self.pos_tags)}
        self.event_types = list(event_types)
        self.event_index = {t: i for i, t in enumerate(self.event_types)}
        seed = config.seed
        if provider is None:
            provider = make_provider(config.provider, config.d_ctx, buckets=config.hash_buckets,
                                     path=config.embeddings_path or None, url=config.embedding_url or None,
                                     rng=derive_rng(seed, "init", "ctx"))
        if provider.dim != config.d_ctx:
            raise ValueError(f"provider yields {provider.dim}-d vectors but d_ctx is {config.d_ctx}")
        self.provider = provider
        if getattr(provider, "trainable", False):
            self.ctx = provider.table
        full = config.features == "full"
        self.use_pos = full
        self.use_event = full and config.task == "argument" and config.event_type_mode != "none"
        if self.use_pos:
            self.pos = Embedding(len(self.pos_tags), config.d_pos, rng=derive_rng(seed, "init", "pos"))
        if self.use_event:
            n = len(self.event_types)
            if n == 0:
                raise ValueError("event type encoding needs at least one event type")
            if config.event_type_mode == "one_hot":
                self.event = Embedding(n, n, learnable=False, weights=np.eye(n))
            else:
                self.event = Embedding(n, config.d_event, rng=derive_rng(seed, "init", "event"))
        if config.segment_encoding == "table":
            self.segment = Embedding(2, config.d_segment, rng=derive_rng(seed, "init", "segment"))

    @property
    def d_token(self) -> int:
        d = self.config.d_ctx
        if self.use_pos:
            d += self.config.d_pos
        if self.use_event:
            d += self.event.dim
        d += self.config.d_segment if self.config.segment_encoding == "table" else 1
        return d

    def pos_id(self, tag: str, sid: str) -> int:
        i = self.pos_index.get(tag)
        if i is None:
            if not self.config.map_unknown_pos:
                raise CorpusError(f"sentence {sid}: unknown POS tag {tag!r}")
            return 0
        return i

    def layout(self, queries) -> Layout:
        cfg = self.config
        arg_task = cfg.task == "argument"
        sep = cfg.input_form == "pair"
        seqs, pos_rows, seg_rows, offsets, sent_lens, ev_ids = [], [], [], [], [], []
        for q in queries:
            sent = q.sentence
            n = len(sent.tokens)
            if n < 1:
                raise CorpusError(f"sentence {sent.id}: empty token list")
            pos = [self.pos_id(p, sent.id) for p in sent.pos]
            if arg_task:
                if q.event is None:
                    raise ValueError(f"sentence {sent.id}: argument task needs a trigger")
                s, e = q.event.trigger_span
                if not 0 <= s <= e < n:
                    raise CorpusError(f"sentence {sent.id}: trigger span {[s, e]} out of range")
                prefix_pos = pos[s:e + 1] + ([self.pos_index[SEP_POS]] if sep else [])
                offset = len(prefix_pos)
                seqs.append(assemble(sent, (s, e), sep))
                pos_rows.append(prefix_pos + pos)
                seg_rows.append([0] * offset + [1 if sep else 0] * n)
                if self.use_event:
                    if q.event.event_type not in self.event_index:
                        raise CorpusError(f"sentence {sent.id}: unknown event type {q.event.event_type!r}")
                    ev_ids.append(self.event_index[q.event.event_type])
                else:
                    ev_ids.append(0)
            else:
                offset = 0
                seqs.append(list(sent.tokens))
                pos_rows.append(pos)
                seg_rows.append([0] * n)
                ev_ids.append(0)
            offsets.append(offset)
            sent_lens.append(n)
        lens = np.array([len(s) for s in seqs], dtype=np.int64)
        width = int(lens.max()) if len(lens) else 0
        B = len(seqs)
        pos_ids = np.zeros((B, width), dtype=np.int64)
        segments = np.zeros((B, width))
        valid = np.zeros((B, width))
        for b in range(B):
            L = lens[b]
            pos_ids[b, :L] = pos_rows[b]
            segments[b, :L] = seg_rows[b]
            valid[b, :L] = 1.0
        return Layout(list(queries), seqs, lens, np.array(offsets, dtype=np.int64),
                      np.array(sent_lens, dtype=np.int64), pos_ids, segments,
                      np.array(ev_ids, dtype=np.int64), valid)

    def contextual(self, tape: Tape, lay: Layout) -> Tensor:
        B, L = lay.valid.shape
        if getattr(self.provider, "trainable", False):
            ids = np.zeros((B, L), dtype=np.int64)
            for b, seq in enumerate(lay.sequences):
                ids[b, :len(seq)] = self.provider.bucket_ids(seq)
            return tape.embedding(self.ctx.weights, ids)
        out = np.zeros((B, L, self.config.d_ctx))
        sep = self.config.input_form == "pair"
        for b, q in enumerate(lay.queries):
            span = q.event.trigger_span if self.config.task == "argument" else None
            vecs = self.provider.embed(q.sentence, span, sep)
            if vecs.shape != (lay.seq_lens[b], self.config.d_ctx):
                raise ValueError(f"provider returned {vecs.shape} for sentence {q.sentence.id}")
            out[b, :vecs.shape[0]] = vecs
        return Tensor(out)

    def compose(self, tape: Tape, lay: Layout) -> Tensor:
        """Token features ``[B, L, d_token]`` for a laid-out batch."""
        B, L = lay.valid.shape
        parts = [self.contextual(tape, lay)]
        if self.use_pos:
            parts.append(self.pos(tape, lay.pos_ids))
        if self.use_event:
            ids = np.repeat(lay.event_ids[:, None], L, axis=1)
            parts.append(self.event(tape, ids))
        if self.config.segment_encoding == "table":
            parts.append(self.segment(tape, lay.segments.astype(np.int64)))
        else:
            parts.append(Tensor(lay.segments[..., None]))
        return tape.concat(parts, axis=-1)


def compose_tokens(sentence: Sentence, trigger: EventAnnotation | None, featurizer: Featurizer) -> np.ndarray:
    """Token features ``[T', d_token]`` for one sentence (and trigger)."""
    if featurizer.config.task == "argument" and trigger is None:
        raise ValueError("argument task needs a trigger")
    if featurizer.config.task == "trigger" and trigger is not None:
        raise ValueError("trigger task takes no trigger")
    lay = featurizer.layout([Query(sentence, trigger)])
    return featurizer.compose(Tape(training=False), lay).data[0]


@dataclass
class ClassifierInput:
    trigger_embed: np.ndarray    # [trigger_slots, D_h]
    candidate_embed: np.ndarray  # [window, D_h]

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.trigger_embed.reshape(-1), self.candidate_embed.reshape(-1)])


def trigger_rows(trigger_span, slots: int) -> list[int]:
    """Sentence positions filling the trigger slots; -1 marks an empty slot."""
    s, e = trigger_span
    if e < s:
        raise ValueError(f"empty trigger span {list(trigger_span)}")
    rows = list(range(s, e + 1))[:slots]
    return rows + [-1] * (slots - len(rows))


def window_rows(position: int, window: int, n: int) -> list[int]:
    half = (window - 1) // 2
    return [p if 0 <= p < n else -1 for p in range(position - half, position + half + 1)]


def build_classifier_input(hidden, position: int, trigger_span, window: int = 3, trigger_slots: int = 3,
                           offset: int = 0) -> ClassifierInput:
    """Assemble trigger slots and the candidate window from ``hidden``.

    ``hidden`` rows ``offset .. offset+T-1`` belong to sentence tokens; rows
    before ``offset`` (a trigger prefix) are never used.
    """
    hidden = np.asarray(hidden, dtype=np.float64)
    T = hidden.shape[0] - offset
    if not 0 <= position < T:
        raise IndexError(f"position {position} outside sentence of length {T}")
    D = hidden.shape[1]

    def take(rows):
        out = np.zeros((len(rows), D))
        for i, r in enumerate(rows):
            if r >= 0:
                out[i] = hidden[offset + r]
        return out

    return ClassifierInput(take(trigger_rows(trigger_span, trigger_slots)), take(window_rows(position, window, T)))
