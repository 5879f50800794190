import itertools
from dataclasses import dataclass

import pytest
from hypothesis import given, settings, strategies as st

from eedgcnn.corpus import Argument, EventAnnotation, Sentence
from eedgcnn.evaluate import PRF, evaluate, score_items
from oracles import max_matching, prf


@dataclass
class _Cfg:
    task: str = "argument"


class _Feat:
    use_event = True


class CannedModel:
    """Returns fixed role predictions keyed by (sentence id, trigger span)."""

    def __init__(self, preds, event_types=("Attack", "Die")):
        self.config = _Cfg()
        self.featurizer = _Feat()
        self.event_types = list(event_types)
        self.preds = preds

    def predict_roles_batch(self, queries):
        return [list(self.preds.get((q.sentence.id, tuple(q.event.trigger_span)), [])) for q in queries]


class CannedTriggers:
    config = _Cfg("trigger")

    def __init__(self, spans):
        self.spans = spans

    def tag_triggers_batch(self, sentences):
        return [self.spans.get(s.id, []) for s in sentences]


def sentence(sid, *events):
    return Sentence(sid, [f"t{i}" for i in range(12)], ["NN"] * 12, list(events))


def event(trig, etype, *args):
    return EventAnnotation((trig, trig), etype, tuple(Argument(sp, r) for sp, r in args))


def test_worked_example():
    s = sentence("w", event(0, "Attack", ((1, 1), "Attacker"), ((3, 4), "Target"), ((6, 6), "Place")))
    model = CannedModel({("w", (0, 0)): [((3, 4), "Victim"), ((8, 8), "Place")]})
    rep = evaluate(model, [s])
    assert (rep.identification.precision, rep.identification.recall) == (0.5, 1 / 3)
    assert rep.identification.f1 == pytest.approx(0.4, abs=1e-15)
    assert (rep.classification.precision, rep.classification.recall, rep.classification.f1) == (0.0, 0.0, 0.0)


def ten_event_fixture():
    V, P, T, A = "Victim", "Place", "Target", "Attacker"
    sents = [
        sentence("e1", event(2, "Attack", ((0, 0), A), ((4, 5), T))),
        sentence("e2", event(7, "Die", ((4, 5), V), ((9, 9), P))),
        sentence("e3", event(1, "Die", ((3, 3), V))),
        sentence("e4", event(1, "Attack")),
        sentence("e5", event(5, "Attack", ((0, 1), A), ((3, 3), T), ((8, 9), P))),
        sentence("e6", event(4, "Die", ((1, 1), V), ((3, 3), P))),
        sentence("e7", event(6, "Attack", ((7, 8), T))),
        sentence("e8", event(0, "Die", ((2, 2), V), ((5, 5), P))),
        sentence("e9", event(3, "Attack", ((10, 11), P))),
        sentence("e10", event(0, "Attack", ((1, 1), A), ((3, 4), T), ((6, 6), P))),
    ]
    preds = {
        ("e1", (2, 2)): [((0, 0), A), ((4, 5), V)],
        ("e2", (7, 7)): [((4, 5), V), ((9, 9), P), ((10, 10), P)],
        ("e4", (1, 1)): [((6, 6), T)],
        ("e5", (5, 5)): [((0, 1), A), ((3, 3), T), ((8, 9), P)],
        ("e6", (4, 4)): [((1, 1), V), ((1, 1), V)],
        ("e7", (6, 6)): [((7, 7), T)],
        ("e8", (0, 0)): [((2, 2), P), ((5, 5), V)],
        ("e9", (3, 3)): [((10, 11), P)],
        ("e10", (0, 0)): [((3, 4), V), ((8, 8), P)],
    }
    return sents, preds


def test_ten_event_fixture_hand_counts():
    sents, preds = ten_event_fixture()
    rep = evaluate(CannedModel(preds), sents)
    # gold 17, predicted 17; 12 spans identified, 8 of them with the right role
    assert (rep.identification.tp, rep.identification.n_pred, rep.identification.n_gold) == (12, 17, 17)
    assert (rep.classification.tp, rep.classification.n_pred, rep.classification.n_gold) == (8, 17, 17)
    assert rep.identification.f1 == 12 / 17
    assert rep.classification.precision == 8 / 17
    # Victim: gold in e2 e3 e6 e8; predicted in e1 e2 e6 e6 e8 e10; hits e2 e6
    assert rep.per_role["Victim"] == {"tp": 2, "fp": 4, "fn": 2}
    assert rep.confusion["Place->Victim"] == 1


def items(sents, preds):
    gold = [(s.id, ev.event_type, a.span, a.role) for s in sents for ev in s.events for a in ev.arguments]
    types = {s.id: s.events[0].event_type for s in sents}
    pred = [(sid, types[sid], sp, r) for (sid, _), spans in preds.items() for sp, r in spans]
    return gold, pred


def check_against_oracle(gold, pred):
    ident, cls, _, _ = score_items(gold, pred)
    id_tp = max_matching(gold, pred, key=lambda x: x[:3])
    cl_tp = max_matching(gold, pred, key=lambda x: x)
    assert (ident.tp, cls.tp) == (id_tp, cl_tp)
    assert (ident.precision, ident.recall, ident.f1) == pytest.approx(prf(id_tp, len(pred), len(gold)), abs=1e-15)
    assert (cls.precision, cls.recall, cls.f1) == pytest.approx(prf(cl_tp, len(pred), len(gold)), abs=1e-15)


def test_ten_event_fixture_oracle():
    check_against_oracle(*items(*ten_event_fixture()))


span = st.tuples(st.integers(0, 3), st.integers(0, 1)).map(lambda t: (t[0], t[0] + t[1]))
item = st.tuples(st.sampled_from(["s1", "s2"]), st.sampled_from(["Attack", "Die"]), span,
                 st.sampled_from(["Victim", "Place", "Target"]))


@settings(max_examples=200, deadline=None)
@given(st.lists(item, max_size=10), st.lists(item, max_size=10))
def test_random_fixtures_match_oracle(gold, pred):
    check_against_oracle(gold, pred)


def test_perfect_and_empty():
    sents, _ = ten_event_fixture()
    gold = {(s.id, tuple(ev.trigger_span)): [(a.span, a.role) for a in ev.arguments] for s in sents for ev in s.events}
    rep = evaluate(CannedModel(gold), sents)
    assert rep.identification.f1 == rep.classification.f1 == 1.0
    rep = evaluate(CannedModel({}), sents)
    assert (rep.classification.precision, rep.classification.recall, rep.classification.f1) == (0.0, 0.0, 0.0)
    rep = evaluate(CannedModel({}), [])
    assert rep.identification.f1 == 0.0


def test_prf_bounds():
    for tp, n_pred, n_gold in itertools.product(range(4), range(4), range(4)):
        if tp > min(n_pred, n_gold):
            continue
        m = PRF(tp, n_pred, n_gold)
        assert 0.0 <= m.precision <= 1.0 and 0.0 <= m.recall <= 1.0
        assert m.f1 == pytest.approx(prf(tp, n_pred, n_gold)[2], abs=1e-15)


def test_predicted_triggers_propagate_errors():
    sents, preds = ten_event_fixture()
    gold_rep = evaluate(CannedModel(preds), sents)
    # e1 typed wrongly, e2 missed, one spurious trigger in e3
    trig = {s.id: [((ev.trigger_span), ev.event_type) for ev in s.events] for s in sents}
    trig["e1"] = [((2, 2), "Die")]
    trig["e2"] = []
    trig["e3"] = trig["e3"] + [((9, 9), "Attack")]
    rep = evaluate(CannedModel(preds), sents, triggers="predicted", trigger_model=CannedTriggers(trig))
    assert rep.triggers["identification"].tp == 9
    assert rep.triggers["classification"].tp == 8
    assert rep.classification.f1 <= gold_rep.classification.f1
    assert rep.classification.tp == gold_rep.classification.tp - 3


def test_predicted_mode_needs_trigger_model():
    with pytest.raises(ValueError):
        evaluate(CannedModel({}), [], triggers="predicted")
