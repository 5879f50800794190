"""The tagger: token features -> projection -> dilated gated conv stack -> head."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import ModelConfig, apply_overrides, config_dict, derive_rng
from .corpus import NONE_LABEL, EventAnnotation, Sentence
from .features import Featurizer, Layout, Query, build_pos_vocab, trigger_rows, window_rows
from .layers import Dense, GatedConvBlock, Module, assign_params, load_params, one_hot, save_params, softmax
from .tensor import Tape, Tensor

FORMAT_VERSION = 1


def label_inventory(config: ModelConfig, event_types) -> list[str]:
    names = list(config.roles) if config.task == "argument" else list(event_types)
    if config.label_scheme == "raw36":
        return [NONE_LABEL] + names
    return [NONE_LABEL] + [f"{p}-{n}" for n in names for p in ("B", "I")]


def decode_labels(labels, scheme: str) -> list[tuple[tuple[int, int], str]]:
    """Turn per-token label strings into ``((start, end), name)`` spans.

    ``raw36`` merges runs of the same label; ``bio`` starts a span at every
    ``B-`` and at any ``I-`` that does not continue its predecessor.
    """
    spans = []
    start, cur = None, None
    for i, lab in enumerate(list(labels) + [NONE_LABEL]):
        if scheme == "raw36":
            name, begin = (None if lab == NONE_LABEL else lab), False
        else:
            if lab == NONE_LABEL:
                name, begin = None, False
            else:
                tag, name = lab.split("-", 1)
                begin = tag == "B"
        if cur is not None and (name != cur or begin):
            spans.append(((start, i - 1), cur))
            cur = None
        if name is not None and cur is None:
            start, cur = i, name
    return spans


def encode_labels(sentence: Sentence, spans, scheme: str, index: dict[str, int]) -> np.ndarray:
    """Gold label ids per token from ``(span, name)`` pairs; later spans win overlaps."""
    out = np.zeros(len(sentence.tokens), dtype=np.int64)
    for (s, e), name in spans:
        for t in range(s, e + 1):
            if scheme == "raw36":
                out[t] = index[name]
            else:
                out[t] = index[("B-" if t == s else "I-") + name]
    return out


@dataclass
class ForwardResult:
    layout: Layout
    all_logits: Tensor  # [B * L, C], every padded position
    rows: np.ndarray    # [N] indices of sentence positions into all_logits
    logits: Tensor      # [N, C]


class EEDGCNN(Module):
    def __init__(self, config: ModelConfig, pos_tags, event_types, provider=None):
        config.validate()
        self.config = config
        self.featurizer = Featurizer(config, pos_tags, event_types, provider)
        self.labels = label_inventory(config, event_types)
        self.label_index = {l: i for i, l in enumerate(self.labels)}
        seed = config.seed
        dh = config.d_hidden
        self.proj = Dense(self.featurizer.d_token, dh, rng=derive_rng(seed, "init", "proj"))
        self.blocks = [
            GatedConvBlock(dh, config.window, int(d), config.gate_combine, config.residual,
                           rng=derive_rng(seed, "init", "block", i))
            for i, d in enumerate(config.dilations)
        ]
        head_in = (config.trigger_slots + config.context_window) * dh if config.task == "argument" else dh
        self.head = Dense(head_in, len(self.labels), rng=derive_rng(seed, "init", "head"))

    @classmethod
    def from_corpus(cls, config: ModelConfig, sentences, provider=None) -> "EEDGCNN":
        event_types = sorted({ev.event_type for s in sentences for ev in s.events})
        return cls(config, build_pos_vocab(sentences), event_types, provider)

    @property
    def n_classes(self) -> int:
        return len(self.labels)

    @property
    def event_types(self) -> list[str]:
        return self.featurizer.event_types

    # -- batching ------------------------------------------------------------

    def queries_for(self, sentences) -> list[Query]:
        if self.config.task == "trigger":
            return [Query(s) for s in sentences]
        return [Query(s, ev) for s in sentences for ev in s.events]

    def gold_labels(self, query: Query) -> np.ndarray:
        scheme = self.config.label_scheme
        if self.config.task == "argument":
            spans = [(a.span, a.role) for a in query.event.arguments]
        else:
            spans = [(ev.trigger_span, ev.event_type) for ev in query.sentence.events]
        return encode_labels(query.sentence, spans, scheme, self.label_index)

    def _head_index(self, lay: Layout) -> np.ndarray:
        """Rows of the flattened hidden matrix feeding each position's classifier input."""
        cfg = self.config
        B, L = lay.valid.shape
        slots = cfg.trigger_slots + cfg.context_window
        idx = np.full((B * L, slots), -1, dtype=np.int64)
        for b, q in enumerate(lay.queries):
            off, n, total = lay.offsets[b], lay.sent_lens[b], lay.seq_lens[b]
            trig = [r if r < 0 else b * L + off + r for r in trigger_rows(q.event.trigger_span, cfg.trigger_slots)]
            for p in range(total):
                t = p - off
                if 0 <= t < n:
                    win = [r if r < 0 else b * L + off + r for r in window_rows(t, cfg.context_window, n)]
                else:
                    # prefix and separator rows: computed, never scored
                    win = [r if r < 0 else b * L + r for r in window_rows(p, cfg.context_window, total)]
                idx[b * L + p] = trig + win
        return idx

    def forward(self, tape: Tape, queries) -> ForwardResult:
        cfg = self.config
        lay = self.featurizer.layout(queries)
        B, L = lay.valid.shape
        x = self.featurizer.compose(tape, lay)
        x = tape.dropout(x, cfg.dropout)
        h = tape.mask(self.proj(tape, x), lay.valid)
        for i, block in enumerate(self.blocks):
            h = tape.mask(block(tape, h), lay.valid)
            if i < len(self.blocks) - 1:
                h = tape.dropout(h, cfg.dropout)
        flat = tape.reshape(h, (B * L, cfg.d_hidden))
        if cfg.task == "argument":
            idx = self._head_index(lay)
            gathered = tape.embedding(flat, idx, allow_pad=True)
            head_in = tape.reshape(gathered, (B * L, idx.shape[1] * cfg.d_hidden))
        else:
            head_in = flat
        all_logits = self.head(tape, head_in)
        rows = np.concatenate([b * L + lay.offsets[b] + np.arange(lay.sent_lens[b]) for b in range(B)])
        logits = tape.embedding(all_logits, rows)
        return ForwardResult(lay, all_logits, rows, logits)

    def loss(self, tape: Tape, queries, reduction: str = "sum") -> tuple[Tensor, ForwardResult]:
        res = self.forward(tape, queries)
        gold = np.concatenate([self.gold_labels(q) for q in queries])
        loss = tape.softmax_xent(res.logits, one_hot(gold, self.n_classes), reduction=reduction)
        return loss, res

    # -- inference -----------------------------------------------------------

    def predict_logits(self, queries, batch_size: int = 64) -> list[np.ndarray]:
        """Per-query ``[T, C]`` logits with dropout off."""
        out = []
        for lo in range(0, len(queries), batch_size):
            chunk = queries[lo:lo + batch_size]
            res = self.forward(Tape(training=False), chunk)
            splits = np.cumsum([len(q.sentence.tokens) for q in chunk])[:-1]
            out.extend(np.split(res.logits.data, splits))
        return out

    def logits(self, sentence: Sentence, trigger: EventAnnotation | None = None) -> np.ndarray:
        return self.predict_logits([Query(sentence, trigger)])[0]

    def probabilities(self, sentence: Sentence, trigger: EventAnnotation | None = None) -> np.ndarray:
        return softmax(self.logits(sentence, trigger))

    def decode(self, logits: np.ndarray):
        labels = [self.labels[i] for i in np.argmax(logits, axis=1)]
        return decode_labels(labels, self.config.label_scheme)

    def predict_roles(self, sentence: Sentence, trigger: EventAnnotation):
        if self.config.task != "argument":
            raise ValueError("predict_roles needs an argument-task model")
        return self.decode(self.logits(sentence, trigger))

    def predict_roles_batch(self, queries) -> list:
        return [self.decode(lg) for lg in self.predict_logits(queries)]

    def tag_triggers(self, sentence: Sentence):
        if self.config.task != "trigger":
            raise ValueError("tag_triggers needs a trigger-task model")
        return self.decode(self.logits(sentence))

    def tag_triggers_batch(self, sentences) -> list:
        return [self.decode(lg) for lg in self.predict_logits([Query(s) for s in sentences])]

    # -- persistence ---------------------------------------------------------

    def save(self, path) -> None:
        header = {
            "format": FORMAT_VERSION,
            "config": config_dict(self.config),
            "pos_tags": self.featurizer.pos_tags,
            "event_types": self.event_types,
            "labels": self.labels,
        }
        save_params(path, self, header)

    @classmethod
    def load(cls, path, provider=None, overrides=None) -> "EEDGCNN":
        """Rebuild a saved model; ``overrides`` may repoint the embedding source."""
        pf = load_params(path)
        header = pf.header
        if header.get("format") != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported model format {header.get('format')!r}")
        config = apply_overrides(ModelConfig(), {**header["config"], **(overrides or {})})
        model = cls(config, header["pos_tags"], header["event_types"], provider)
        assign_params(model, pf.arrays)
        return model

    def param_count(self) -> int:
        return int(sum(p.data.size for p in self.params()))
