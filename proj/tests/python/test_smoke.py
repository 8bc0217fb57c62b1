import json
import os
from pathlib import Path

import numpy as np
import pytest

import forge

FIXTURES = Path(os.environ.get("FORGE_FIXTURES", Path(__file__).resolve().parent.parent / "fixtures"))


def read_jsonl(name):
    with open(FIXTURES / name, encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def test_normalize_and_segment():
    assert forge.normalize("ऩ  x ") == "ऩ x"
    assert forge.sentences("Dr. Rai left. He came back.", "en") == ["Dr. Rai left.", "He came back."]
    assert forge.segment("नेपाल सुन्दर छ। हिमाल अग्लो छ।", "ne") == [(0, 15), (16, 30)]
    with pytest.raises(ValueError):
        forge.segment("", "en")
    with pytest.raises(ValueError):
        forge.segment("x", "fr")


def test_chrfpp_golden():
    for rec in read_jsonl("chrf_golden.jsonl"):
        assert abs(forge.chrfpp(rec["hyp"], rec["ref"]) - rec["score"]) <= 0.1
    assert forge.chrfpp("same", "same") == 100.0


def test_roundtrip_filter():
    kept, scores, report = forge.roundtrip_filter(["a b c", "a b c", "x y"], ["a b c", None, "q"], cutoff=50)
    assert kept == [True, False, False]
    assert scores[0] == 100.0 and scores[1] is None
    assert report["missing_backtranslation"] == 1


def test_interleave_kathmandu():
    pair = read_jsonl("pairs.jsonl")[0]
    text = forge.interleave(pair["en_text"], pair["ne_text"], lead="en")
    assert text.startswith("Before the unification of Nepal")
    assert "अनिश्चित छ।" in text
    assert forge.interleave("One. Two.", "एक।", lead="ne") is None


def test_pooling_matches_numpy():
    t = forge.load_tensor(FIXTURES / "attn" / "s1.atnt")
    att = t["attention"]
    words = [(w["tok_start"], w["tok_end"]) for w in t["meta"]["words"]]
    pooled = forge.pool(att, words, "max")
    for i, (a, b) in enumerate(words):
        for j, (c, d) in enumerate(words):
            block = att[:, :, a:b, c:d].astype(np.float64)
            np.testing.assert_array_equal(pooled[:, :, i, j], block.max(axis=(2, 3)))
    assert forge.align_tokens("ab cd", [("ab", 0, 2), (" c", 2, 4), ("d", 4, 5)]) == [("ab", 0, 1), ("cd", 1, 3)]


def test_concept_and_evalkit():
    m = np.random.default_rng(0).random((4, 3))
    np.testing.assert_allclose(forge.concept_mean([m, m, m]), m, atol=1e-12)
    assert forge.pct_change(0.3183, 0.3797) == 19.29
    assert forge.pct_change(0.0, 0.5) is None
    table = forge.bench_report(read_jsonl("bench_scores.jsonl"))
    assert "+11.94%" in table and "-1.25%" in table
    stats = forge.gen_stats(read_jsonl("gen_scores.jsonl"))
    assert set(stats) == {"base", "ours"}
    assert stats["ours"]["attributes"]["overall"]["count"] == 78
