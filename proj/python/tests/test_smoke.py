import json
import os
from pathlib import Path

import numpy as np
import pytest

import evoflow

FIXTURES = Path(os.environ.get("EVOFLOW_FIXTURES", Path(__file__).resolve().parents[2] / "tests" / "fixtures"))


def test_tournament_scores():
    result = evoflow.score_tournament({"X": 2, "Y": 1, "Z": 0})
    assert result["scores"]["X"] == 2.0
    assert result["scores"]["Y"] == pytest.approx(2 / 3)
    assert result["scores"]["Z"] == 0.0


def test_tournament_needs_two_models():
    with pytest.raises(evoflow.EvoflowError):
        evoflow.score_tournament({"X": 0})


def test_curation_total():
    assert evoflow.score_curation({"a": 4.5, "b": 3.0, "c": 5.0}) == 12.5
    with pytest.raises(evoflow.EvoflowError):
        evoflow.score_curation({"a": 5.5})


def test_ridge_and_combinations():
    model = evoflow.fit_ridge([("A1G", 1.0), ("C2G", 3.0)], lam=0.0)
    assert model["intercept"] == pytest.approx(2.0)
    top = evoflow.top_combinations(model, [2], 1)
    assert top[2][0]["variant"] == "A1G,C2G"
    assert top[2][0]["predicted_score"] == pytest.approx(2.0)


def test_plan_round_trip():
    text = (FIXTURES / "plans" / "function.json").read_text()
    parsed = evoflow.parse_plan(text)
    assert parsed["kind"] == "plan"
    assert parsed["steps"][0]["step"] == 1
    assert evoflow.parse_plan("[]")["kind"] == "empty"
    with pytest.raises(evoflow.EvoflowError, match="forward-dependency"):
        evoflow.parse_plan(
            '[{"step": 1, "task_description": "a", "tool_name": "read_fasta",'
            ' "tool_input": {"fasta_file": "dependency:step_2"}}]'
        )


def test_check_mutation():
    assert evoflow.check_mutation("E7V", "MQVQLVESGG") == {"wild": "E", "position": 7, "mutant": "V"}
    with pytest.raises(evoflow.EvoflowError, match="wild-mismatch"):
        evoflow.check_mutation("A7V", "MQVQLVESGG")


def test_pooling_matches_numpy():
    rng = np.random.default_rng(3)
    H = rng.normal(size=(9, 4))
    np.testing.assert_allclose(evoflow.pool_protein(H), H.mean(axis=0), atol=1e-12)
    v = rng.normal(size=4)
    logits = H @ v + 0.3
    w = np.exp(logits - logits.max())
    w /= w.sum()
    np.testing.assert_allclose(evoflow.pool_protein(H, "light_attention", v, 0.3), w @ H, atol=1e-12)
    W = rng.normal(size=(4, 3))
    b = rng.normal(size=3)
    P = evoflow.project_residues(H, W, b)
    np.testing.assert_allclose(P.sum(axis=1), np.ones(9), atol=1e-12)


def test_generated_config_validates():
    config = evoflow.generate_config(FIXTURES / "cs1" / "data" / "train_split.csv", "Use ESM2-8M with LoRA")
    assert config["plm_model"] == "ESM2-8M"
    assert config["seed"] == 3407
    assert evoflow.validate_config(config) == []
    config["learning_rate"] = -1
    assert evoflow.validate_config(config)


def test_case_study_session(tmp_path):
    first = evoflow.run_session(FIXTURES / "cs1", "Build an allergen predictor", tmp_path / "a")
    second = evoflow.run_session(FIXTURES / "cs1", "Build an allergen predictor", tmp_path / "b")
    assert first["phase"] == "Done"
    assert "predict_allergenicity" in first["tools"]
    assert first["record"].count("\n") > 10
    # Output paths are part of the record, so compare event kinds only.
    def kinds(run):
        return [json.loads(line)["kind"] for line in run["record"].splitlines()]

    assert kinds(first) == kinds(second)


def test_builtin_catalog():
    names = evoflow.builtin_tools()
    assert "literature_search" in names
    assert "predict_allergenicity" not in names
