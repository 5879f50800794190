import numpy as np
import pytest

from eedgcnn.ablation import (AblationCell, AblationMatrix, dimension_sweep_cells, event_type_cells, grid_cells,
                              run_ablation)
from eedgcnn.corpus import split_corpus
from eedgcnn.evaluate import evaluate
from eedgcnn.model import EEDGCNN
from eedgcnn.synthetic import SyntheticSpec, generate_synthetic
from eedgcnn.train import train

BASE = dict(d_ctx=8, d_pos=4, d_hidden=8, hash_buckets=211, d_event=8)
TRAIN = dict(epochs=2, learning_rate=2e-3)


@pytest.fixture(scope="module")
def corpus():
    return generate_synthetic(SyntheticSpec(seed=12, n_sentences=80))


def test_single_cell_equals_direct_run(corpus):
    matrix = AblationMatrix([AblationCell("only", {"event_type_mode": "one_hot"})], seeds=(3,), model=BASE, train=TRAIN)
    result = run_ablation(matrix, corpus)
    assert len(result.runs) == 1 and result.runs[0].error is None
    mcfg, tcfg = matrix.configs(matrix.cells[0], 3)
    splits = split_corpus(corpus)
    model = EEDGCNN.from_corpus(mcfg, splits["train"])
    direct = train(model, splits["train"], tcfg, val_sentences=splits["val"])
    report = evaluate(model, splits["test"])
    assert result.runs[0].losses == direct.losses
    assert result.runs[0].report.classification == report.classification
    assert result.runs[0].report.identification == report.identification


def test_same_seed_same_initial_stack(corpus):
    matrix = AblationMatrix(event_type_cells(), seeds=(0, 1), model=BASE, train=TRAIN)
    models = {c.name: EEDGCNN.from_corpus(matrix.configs(c, 0)[0], corpus) for c in matrix.cells}
    ref = dict(models["No Event Type"].named_params())
    for name, model in models.items():
        params = dict(model.named_params())
        for key in ref:
            if key.startswith(("blocks", "featurizer.ctx", "featurizer.pos")):
                assert np.array_equal(params[key].data, ref[key].data), (name, key)
    other = EEDGCNN.from_corpus(matrix.configs(matrix.cells[0], 1)[0], corpus)
    assert not np.array_equal(dict(other.named_params())["blocks.0.conv_value.W"].data,
                              ref["blocks.0.conv_value.W"].data)


def test_summary_table_rows(corpus):
    cells = [AblationCell("none", {"event_type_mode": "none"}), AblationCell("400D", {"d_event": 400})]
    result = run_ablation(AblationMatrix(cells, seeds=(0, 1), model=BASE, train=TRAIN), corpus)
    table = result.table()
    assert "none" in table and "400D" in table
    for row in result.summary():
        assert row.runs == 2 and row.failures == 0
        s = row.stat("classification")
        assert s["min"] <= s["mean"] <= s["max"]
    assert result.as_dict()["summary"][1]["cell"] == "400D"


def test_failing_cell_is_recorded(corpus):
    cells = [AblationCell("ok", {}), AblationCell("bad", {"provider": "file_backed", "embeddings_path": "/nope"})]
    result = run_ablation(AblationMatrix(cells, seeds=(0,), model=BASE, train=TRAIN), corpus)
    bad = result.row("bad")
    assert bad.failures == 1 and result.row("ok").failures == 0
    assert "ProviderError" in next(r.error for r in result.runs if r.cell == "bad")


def test_presets_and_validation():
    assert [c.name for c in dimension_sweep_cells()] == ["10D", "50D", "100D", "200D", "400D"]
    assert len(grid_cells(["simple", "full"], ["single", "pair"], ["none", "one_hot", "400"])) == 12
    with pytest.raises(ValueError):
        AblationMatrix([AblationCell("a"), AblationCell("a")]).validate()
    with pytest.raises(ValueError):
        AblationMatrix([AblationCell("a", {"d_hidden": "wide"})]).validate()
