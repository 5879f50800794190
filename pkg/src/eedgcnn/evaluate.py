"""Argument identification/classification scoring.

An argument item is ``(sentence id, event type, span, role)``.  A predicted
item is *identified* when sentence, event type and span match a gold item,
and *classified* when the role matches too.  Each gold item absorbs at most
one prediction (multiset intersection), micro-averaged over the corpus.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field

from .corpus import EventAnnotation
from .features import Query


@dataclass
class PRF:
    tp: int = 0
    n_pred: int = 0
    n_gold: int = 0

    @property
    def precision(self) -> float:
        return self.tp / self.n_pred if self.n_pred else 0.0

    @property
    def recall(self) -> float:
        return self.tp / self.n_gold if self.n_gold else 0.0

    @property
    def f1(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def as_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall, "f1": self.f1,
                "tp": self.tp, "n_pred": self.n_pred, "n_gold": self.n_gold}


@dataclass
class EvalReport:
    identification: PRF
    classification: PRF
    per_role: dict = field(default_factory=dict)   # role -> {"tp", "fp", "fn"}
    confusion: dict = field(default_factory=dict)  # "gold->pred" -> count over identified spans
    triggers: dict | None = None                   # trigger identification/classification, predicted mode
    metadata: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        out = {
            "identification": self.identification.as_dict(),
            "classification": self.classification.as_dict(),
            "per_role": self.per_role,
            "confusion": self.confusion,
            "metadata": self.metadata,
        }
        if self.triggers is not None:
            out["triggers"] = {k: v.as_dict() for k, v in self.triggers.items()}
        return out

    def table(self) -> str:
        rows = [("Argument identification", self.identification), ("Argument role", self.classification)]
        if self.metadata.get("task") == "trigger":
            rows = []
        if self.triggers is not None:
            rows = [("Trigger identification", self.triggers["identification"]),
                    ("Trigger classification", self.triggers["classification"])] + rows
        width = max(len(r[0]) for r in rows)
        lines = [f"{'':<{width}}  {'P':>6}  {'R':>6}  {'F1':>6}"]
        for name, m in rows:
            lines.append(f"{name:<{width}}  {100 * m.precision:6.1f}  {100 * m.recall:6.1f}  {100 * m.f1:6.1f}")
        return "\n".join(lines)


def score_items(gold, pred) -> tuple[PRF, PRF, dict, dict]:
    """Score ``(sid, event_type, span, role)`` item lists."""
    gold, pred = list(gold), list(pred)
    g_id = Counter((s, t, sp) for s, t, sp, _ in gold)
    p_id = Counter((s, t, sp) for s, t, sp, _ in pred)
    g_cl = Counter(gold)
    p_cl = Counter(pred)
    ident = PRF(sum((g_id & p_id).values()), len(pred), len(gold))
    hit = g_cl & p_cl
    cls = PRF(sum(hit.values()), len(pred), len(gold))
    per_role: dict[str, dict] = {}
    for item, n in g_cl.items():
        per_role.setdefault(item[3], {"tp": 0, "fp": 0, "fn": 0})["fn"] += n - hit.get(item, 0)
    for item, n in p_cl.items():
        per_role.setdefault(item[3], {"tp": 0, "fp": 0, "fn": 0})["fp"] += n - hit.get(item, 0)
    for item, n in hit.items():
        per_role[item[3]]["tp"] += n
    # pair identified spans by role to fill a gold->pred confusion table
    confusion: Counter = Counter()
    by_key_gold: dict = {}
    for s, t, sp, r in gold:
        by_key_gold.setdefault((s, t, sp), []).append(r)
    by_key_pred: dict = {}
    for s, t, sp, r in pred:
        by_key_pred.setdefault((s, t, sp), []).append(r)
    for key, g_roles in by_key_gold.items():
        p_roles = list(by_key_pred.get(key, []))
        rest = []
        for r in g_roles:
            if r in p_roles:
                p_roles.remove(r)
                confusion[f"{r}->{r}"] += 1
            else:
                rest.append(r)
        for r, q in zip(rest, p_roles):
            confusion[f"{r}->{q}"] += 1
    return ident, cls, dict(sorted(per_role.items())), dict(sorted(confusion.items()))


def gold_argument_items(sentences) -> list:
    return [(s.id, ev.event_type, tuple(a.span), a.role) for s in sentences for ev in s.events for a in ev.arguments]


def gold_trigger_items(sentences) -> list:
    return [(s.id, tuple(ev.trigger_span), ev.event_type) for s in sentences for ev in s.events]


def score_triggers(gold, pred) -> dict[str, PRF]:
    g_id = Counter((s, sp) for s, sp, _ in gold)
    p_id = Counter((s, sp) for s, sp, _ in pred)
    return {
        "identification": PRF(sum((g_id & p_id).values()), len(pred), len(gold)),
        "classification": PRF(sum((Counter(gold) & Counter(pred)).values()), len(pred), len(gold)),
    }


def evaluate(model, sentences, triggers: str = "gold", trigger_model=None) -> EvalReport:
    """Score an argument model on ``sentences``.

    ``triggers="gold"`` queries every annotated event; ``"predicted"`` first
    runs ``trigger_model`` and queries each predicted ``(span, type)``.  A
    trigger-task model passed as ``model`` is scored on triggers only.
    """
    sentences = list(sentences)
    if model.config.task == "trigger":
        pred = [(s.id, span, t) for s, spans in zip(sentences, model.tag_triggers_batch(sentences)) for span, t in spans]
        trig = score_triggers(gold_trigger_items(sentences), pred)
        return EvalReport(trig["identification"], trig["classification"], triggers=trig,
                          metadata={"task": "trigger", "sentences": len(sentences)})
    trig_report = None
    if triggers == "gold":
        queries = [Query(s, ev) for s in sentences for ev in s.events]
    elif triggers == "predicted":
        if trigger_model is None:
            raise ValueError("predicted-trigger evaluation needs a trigger model")
        tagged = trigger_model.tag_triggers_batch(sentences) if sentences else []
        known = set(model.event_types)
        queries = []
        trig_pred = []
        for s, spans in zip(sentences, tagged):
            for span, etype in spans:
                trig_pred.append((s.id, span, etype))
                # an event type unseen by the argument model cannot be encoded
                if etype in known or not model.featurizer.use_event:
                    queries.append(Query(s, EventAnnotation(span, etype)))
        trig_report = score_triggers(gold_trigger_items(sentences), trig_pred)
    else:
        raise ValueError(f"triggers must be 'gold' or 'predicted', got {triggers!r}")
    pred_items = []
    if queries:
        for q, spans in zip(queries, model.predict_roles_batch(queries)):
            pred_items.extend((q.sentence.id, q.event.event_type, span, role) for span, role in spans)
    ident, cls, per_role, confusion = score_items(gold_argument_items(sentences), pred_items)
    return EvalReport(ident, cls, per_role, confusion, trig_report,
                      {"task": "argument", "triggers": triggers, "sentences": len(sentences), "queries": len(queries)})


def default_score(model, sentences) -> float:
    return evaluate(model, sentences).classification.f1
