"""Seeded synthetic event corpora.

Each event is one clause: an optional argument before the trigger (slot 0),
the trigger, then the remaining slots, with distractor runs in the gaps.
Filler words are drawn per slot index and are shared across event types, so
the role of a filler depends on the event type.  Some triggers come from a
family shared by all types, which makes the type unrecoverable from the text
alone.  Multi-event sentences join two clauses of different types.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .corpus import Argument, EventAnnotation, Sentence

CONNECTORS = (("when", "WRB"), ("after", "IN"), ("as", "IN"), ("while", "IN"))
DISTRACTOR_POS = ("DT", "JJ", "RB", "IN", "NN", "VBZ", "CD")
_ONSETS = "b c d f g h k l m n p r s t v z br tr kl st".split()
_VOWELS = "a e i o u ai ou".split()


class SyntheticSpecError(ValueError):
    """The spec cannot produce a corpus."""


@dataclass
class SyntheticSpec:
    seed: int = 7
    n_sentences: int = 200
    event_types: tuple = ("Attack", "Die", "Transport")
    roles: tuple = ("Attacker", "Target", "Victim", "Place", "Artifact", "Destination")
    type_roles: dict = field(default_factory=dict)  # event type -> ordered roles; default: contiguous split
    type_weights: tuple = ()                        # default uniform
    trigger_words_per_type: int = 4
    shared_trigger_words: int = 3
    ambiguous_trigger_rate: float = 0.3
    fillers_per_slot: int = 12
    max_arg_len: int = 2
    arg_presence: float = 0.85
    distractor_vocab: int = 150
    noise_rate: float = 0.4
    max_noise_run: int = 2
    pos_confusion_rate: float = 0.1
    multi_event_rate: float = 0.3
    max_tokens: int = 40

    def resolved_type_roles(self) -> dict[str, list[str]]:
        if self.type_roles:
            return {t: list(self.type_roles[t]) for t in self.event_types}
        n = len(self.event_types)
        chunks = np.array_split(np.arange(len(self.roles)), n)
        return {t: [self.roles[i] for i in chunk] for t, chunk in zip(self.event_types, chunks)}

    def weights(self) -> np.ndarray:
        w = np.asarray(self.type_weights or [1.0] * len(self.event_types), dtype=np.float64)
        return w / w.sum()

    def to_json(self) -> str:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, obj: dict) -> "SyntheticSpec":
        names = {f.name for f in fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise SyntheticSpecError(f"unknown synthetic spec keys: {sorted(unknown)}")
        kw = {k: (tuple(v) if isinstance(v, list) else v) for k, v in obj.items()}
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "SyntheticSpec":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _word_factory(rng: np.random.Generator):
    used: set[str] = set()

    def make() -> str:
        while True:
            n = rng.integers(2, 4)
            w = "".join(_ONSETS[rng.integers(len(_ONSETS))] + _VOWELS[rng.integers(len(_VOWELS))] for _ in range(n))
            if w not in used:
                used.add(w)
                return w

    return make


@dataclass
class _Lexicon:
    triggers: dict
    shared_triggers: list
    slot_fillers: list
    distractors: list


def _lexicon(spec: SyntheticSpec, rng, max_slots: int) -> _Lexicon:
    word = _word_factory(rng)
    triggers = {t: [word() for _ in range(spec.trigger_words_per_type)] for t in spec.event_types}
    shared = [word() for _ in range(spec.shared_trigger_words)]
    fillers = [[word().capitalize() for _ in range(spec.fillers_per_slot)] for _ in range(max_slots)]
    distractors = [word() for _ in range(spec.distractor_vocab)]
    return _Lexicon(triggers, shared, fillers, distractors)


def _validate(spec: SyntheticSpec, type_roles) -> None:
    if spec.n_sentences < 0:
        raise SyntheticSpecError("n_sentences must be non-negative")
    if not spec.event_types or not spec.roles:
        raise SyntheticSpecError("event type and role inventories must be non-empty")
    if len(spec.type_weights) not in (0, len(spec.event_types)):
        raise SyntheticSpecError("type_weights must match event_types")
    for t, rs in type_roles.items():
        if not rs:
            raise SyntheticSpecError(f"event type {t} has no roles")
        for r in rs:
            if r not in spec.roles:
                raise SyntheticSpecError(f"event type {t} uses role {r!r} outside the role inventory")
        if 1 + len(rs) > spec.max_tokens:
            raise SyntheticSpecError(f"event type {t} needs {1 + len(rs)} tokens but max_tokens is {spec.max_tokens}")
    if spec.trigger_words_per_type < 1 or spec.fillers_per_slot < 1 or spec.max_arg_len < 1:
        raise SyntheticSpecError("word family sizes and max_arg_len must be positive")
    if spec.ambiguous_trigger_rate > 0 and spec.shared_trigger_words < 1:
        raise SyntheticSpecError("ambiguous triggers need shared_trigger_words >= 1")
    if spec.distractor_vocab < 1 and spec.noise_rate > 0:
        raise SyntheticSpecError("noise needs a distractor vocabulary")


def _clause(spec, lex, rng, etype, roles, allow_ambiguous):
    """Tokens, POS, trigger offset and (start, end, role) argument offsets for one event."""
    toks, pos = [], []
    args = []

    def noise():
        if rng.random() < spec.noise_rate:
            for _ in range(rng.integers(1, spec.max_noise_run + 1)):
                if rng.random() < spec.pos_confusion_rate:
                    slot = lex.slot_fillers[rng.integers(len(lex.slot_fillers))]
                    toks.append(slot[rng.integers(len(slot))])
                    pos.append("NN")
                else:
                    toks.append(lex.distractors[rng.integers(len(lex.distractors))])
                    pos.append(DISTRACTOR_POS[rng.integers(len(DISTRACTOR_POS))])

    def filler(slot):
        pool = lex.slot_fillers[slot]
        start = len(toks)
        for _ in range(rng.integers(1, spec.max_arg_len + 1)):
            toks.append(pool[rng.integers(len(pool))])
            pos.append("NNP")
        return start, len(toks) - 1

    present = rng.random(len(roles)) < spec.arg_presence
    if not present.any():
        present[rng.integers(len(roles))] = True
    ambiguous = allow_ambiguous and rng.random() < spec.ambiguous_trigger_rate
    noise()
    if present[0]:
        s, e = filler(0)
        args.append((s, e, roles[0]))
        noise()
    family = lex.shared_triggers if ambiguous else lex.triggers[etype]
    trig = len(toks)
    toks.append(family[rng.integers(len(family))])
    pos.append("VBD")
    for slot in range(1, len(roles)):
        noise()
        if present[slot]:
            s, e = filler(slot)
            args.append((s, e, roles[slot]))
    noise()
    return toks, pos, trig, args, ambiguous


def generate_synthetic(spec: SyntheticSpec) -> list[Sentence]:
    """Deterministic corpus for ``spec``; identical specs give identical corpora."""
    type_roles = spec.resolved_type_roles()
    _validate(spec, type_roles)
    if spec.n_sentences == 0:
        return []
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(spec.seed)))
    max_slots = max(len(r) for r in type_roles.values())
    lex = _lexicon(spec, rng, max_slots)
    weights = spec.weights()
    types = list(spec.event_types)
    out = []
    for i in range(spec.n_sentences):
        n_events = 2 if (len(types) > 1 and rng.random() < spec.multi_event_rate) else 1
        chosen = list(rng.choice(len(types), size=n_events, replace=False, p=weights))
        for _ in range(100):
            toks, pos, events = [], [], []
            ambiguous_used = False
            for k, ti in enumerate(chosen):
                if k:
                    word, tag = CONNECTORS[rng.integers(len(CONNECTORS))]
                    toks.append(word)
                    pos.append(tag)
                etype = types[ti]
                ctoks, cpos, trig, cargs, amb = _clause(spec, lex, rng, etype, type_roles[etype], not ambiguous_used)
                ambiguous_used = ambiguous_used or amb
                base = len(toks)
                toks += ctoks
                pos += cpos
                arguments = tuple(Argument((base + s, base + e), r) for s, e, r in cargs)
                events.append(EventAnnotation((base + trig, base + trig), etype, arguments))
            toks.append(".")
            pos.append(".")
            if len(toks) <= spec.max_tokens:
                break
        else:
            raise SyntheticSpecError(f"could not fit sentence {i} within max_tokens={spec.max_tokens}")
        out.append(Sentence(f"syn{spec.seed}-{i:06d}", toks, pos, events))
    return out
