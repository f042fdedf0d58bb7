"""The QRCD-backed acceptance checks, exercised on a fake release directory."""

import json
import random

import pytest

import test_acceptance as acceptance
from conftest import WORDS


def fake_release(root, sizes):
    rng = random.Random(7)
    for split, (multi, single, zero) in sizes.items():
        lines = []
        for i, n_answers in enumerate([2] * multi + [1] * single + [0] * zero):
            words = [rng.choice(WORDS) for _ in range(25)]
            passage = " ".join(words)
            answers = []
            for j in range(n_answers):
                text = " ".join(words[5 * j + 1 : 5 * j + 3])
                answers.append({"text": text, "start_char": passage.find(text)})
            lines.append(json.dumps({
                "pq_id": f"{split}-{i}", "passage": passage, "surah": 1, "verses": "1-7",
                "question": "سؤال", "answers": answers,
            }, ensure_ascii=False))
        (root / f"qrcd_v1.2_{split}.jsonl").write_text("\n".join(lines) + "\n", encoding="utf-8")


@pytest.fixture
def release(tmp_path, monkeypatch):
    fake_release(tmp_path, {"train": (5, 10, 2), "dev": (1, 3, 1), "test": (62, 331, 14)})
    monkeypatch.setenv("QRCD_DIR", str(tmp_path))
    return tmp_path


def test_calibration_and_alignment_on_fake_release(release):
    assert acceptance.run_criterion("", acceptance.check_degenerate_calibration)[0]
    ok, detail = acceptance.run_criterion("", acceptance.check_alignment_audit)
    assert ok, detail


def test_corpus_audit_reports_counts(release):
    ok, detail = acceptance.run_criterion("", acceptance.check_corpus_audit)
    assert not ok and "QP per split (17, 5, 407)" in detail


def test_missing_release_fails(tmp_path, monkeypatch):
    monkeypatch.setenv("QRCD_DIR", str(tmp_path / "absent"))
    ok, detail = acceptance.run_criterion("", acceptance.check_corpus_audit)
    assert not ok and "QRCD_DIR" in detail


def test_ambiguous_release_fails(release):
    (release / "qrcd_v1.2_test_copy.jsonl").write_text("")
    ok, detail = acceptance.run_criterion("", acceptance.check_degenerate_calibration)
    assert not ok and "expected one" in detail
