"""Corpus types and the JSON-lines corpus format.

One object per line, canonical field order::

    {"id": ..., "tokens": [...], "pos": [...],
     "events": [{"trigger": [s, e], "event_type": ..., "arguments": [{"span": [s, e], "role": ...}]}]}

Spans are inclusive token index pairs.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from pathlib import Path

# the 35 ACE 2005 argument roles; "None" is the 36th class and never stored
ACE_ROLES = (
    "Person", "Place", "Buyer", "Seller", "Beneficiary", "Price", "Artifact", "Origin",
    "Destination", "Giver", "Recipient", "Money", "Org", "Agent", "Victim", "Instrument",
    "Entity", "Attacker", "Target", "Defendant", "Adjudicator", "Prosecutor", "Plaintiff",
    "Crime", "Position", "Sentence", "Vehicle", "Time-Within", "Time-Starting", "Time-Ending",
    "Time-Before", "Time-After", "Time-Holds", "Time-At-Beginning", "Time-At-End",
)
NONE_LABEL = "None"

Span = tuple[int, int]


class CorpusError(ValueError):
    """Malformed or inconsistent corpus data."""


@dataclass(frozen=True)
class Argument:
    span: Span
    role: str


@dataclass(frozen=True)
class EventAnnotation:
    trigger_span: Span
    event_type: str
    arguments: tuple[Argument, ...] = ()


@dataclass
class Sentence:
    id: str
    tokens: list[str]
    pos: list[str]
    events: list[EventAnnotation] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.tokens)

    def validate(self, roles=None) -> None:
        n = len(self.tokens)
        if len(self.pos) != n:
            raise CorpusError(f"sentence {self.id}: {n} tokens but {len(self.pos)} POS tags")
        for ev in self.events:
            _check_span(self.id, ev.trigger_span, n, "trigger")
            for arg in ev.arguments:
                _check_span(self.id, arg.span, n, "argument")
                if arg.role == NONE_LABEL:
                    raise CorpusError(f"sentence {self.id}: role 'None' must not be stored")
                if roles is not None and arg.role not in roles:
                    raise CorpusError(f"sentence {self.id}: unknown role {arg.role!r}")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "tokens": list(self.tokens),
            "pos": list(self.pos),
            "events": [
                {
                    "trigger": list(ev.trigger_span),
                    "event_type": ev.event_type,
                    "arguments": [{"span": list(a.span), "role": a.role} for a in ev.arguments],
                }
                for ev in self.events
            ],
        }


def _check_span(sid: str, span, n: int, what: str) -> None:
    s, e = span
    if not (0 <= s <= e < n):
        raise CorpusError(f"sentence {sid}: {what} span {list(span)} outside [0, {n})")


def _span(obj, where: str) -> Span:
    if not (isinstance(obj, list) and len(obj) == 2 and all(isinstance(v, int) and not isinstance(v, bool) for v in obj)):
        raise CorpusError(f"{where}: span must be [start, end] integers, got {obj!r}")
    return (obj[0], obj[1])


def sentence_from_dict(obj: dict, where: str = "sentence", roles=None) -> Sentence:
    if not isinstance(obj, dict):
        raise CorpusError(f"{where}: expected a JSON object")
    try:
        sid = obj["id"]
        tokens = obj["tokens"]
        pos = obj["pos"]
    except KeyError as exc:
        raise CorpusError(f"{where}: missing field {exc.args[0]!r}") from None
    if not isinstance(sid, str):
        raise CorpusError(f"{where}: id must be a string")
    if not (isinstance(tokens, list) and all(isinstance(t, str) for t in tokens)):
        raise CorpusError(f"{where}: tokens must be a list of strings")
    if not (isinstance(pos, list) and all(isinstance(t, str) for t in pos)):
        raise CorpusError(f"{where}: pos must be a list of strings")
    events = []
    for i, ev in enumerate(obj.get("events", [])):
        loc = f"{where} (id {sid}) event {i}"
        try:
            args = tuple(Argument(_span(a["span"], loc), a["role"]) for a in ev.get("arguments", []))
            events.append(EventAnnotation(_span(ev["trigger"], loc), ev["event_type"], args))
        except (KeyError, TypeError, AttributeError) as exc:
            raise CorpusError(f"{loc}: malformed event ({exc})") from None
    sent = Sentence(sid, list(tokens), list(pos), events)
    try:
        sent.validate(roles)
    except CorpusError as exc:
        raise CorpusError(f"{where}: {exc}") from None
    return sent


def dumps_sentence(sentence: Sentence) -> str:
    return json.dumps(sentence.to_dict(), ensure_ascii=False, separators=(",", ":"))


def parse_lines(lines, source: str = "<corpus>", roles=None) -> list[Sentence]:
    out = []
    seen = set()
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        where = f"{source}:{lineno}"
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"{where}: invalid JSON ({exc.msg})") from None
        sent = sentence_from_dict(obj, where, roles)
        if sent.id in seen:
            raise CorpusError(f"{where}: duplicate sentence id {sent.id!r}")
        seen.add(sent.id)
        out.append(sent)
    return out


def parse_corpus(path, roles=None) -> list[Sentence]:
    path = Path(path)
    with path.open(encoding="utf-8") as fh:
        return parse_lines(fh, str(path), roles)


def serialize_corpus(sentences) -> str:
    return "".join(dumps_sentence(s) + "\n" for s in sentences)


def write_corpus(path, sentences) -> None:
    Path(path).write_text(serialize_corpus(sentences), encoding="utf-8")


def split_of(sentence_id: str) -> str:
    """Deterministic 80/10/10 assignment from a hash of the sentence id."""
    bucket = zlib.crc32(sentence_id.encode("utf-8")) % 10
    if bucket < 8:
        return "train"
    return "val" if bucket == 8 else "test"


def split_corpus(sentences) -> dict[str, list[Sentence]]:
    parts = {"train": [], "val": [], "test": []}
    for s in sentences:
        parts[split_of(s.id)].append(s)
    return parts


def select_split(sentences, name: str) -> list[Sentence]:
    if name == "all":
        return list(sentences)
    if name not in ("train", "val", "test"):
        raise ValueError(f"unknown split {name!r}")
    return split_corpus(sentences)[name]


def two_event_example() -> Sentence:
    """The two-event example sentence with its attack and die annotations."""
    tokens = "In Baghdad , a cameraman died when an American tank fired on the Palestine Hotel .".split()
    pos = ["IN", "NNP", ",", "DT", "NN", "VBD", "WRB", "DT", "JJ", "NN", "VBD", "IN", "DT", "NNP", "NNP", "."]
    die = EventAnnotation((5, 5), "Die", (Argument((4, 4), "Victim"), Argument((13, 14), "Place")))
    attack = EventAnnotation((10, 10), "Attack", (
        Argument((1, 1), "Place"),
        Argument((4, 4), "Target"),
        Argument((8, 9), "Attacker"),
        Argument((13, 14), "Place"),
    ))
    return Sentence("baghdad-1", tokens, pos, [die, attack])
