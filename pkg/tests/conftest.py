from __future__ import annotations

import os
from pathlib import Path

import pytest
from hypothesis import settings

from quranqa.corpus import GoldAnswer, QPARecord

settings.register_profile("ci", deadline=None, max_examples=200)
settings.load_profile("ci")

FIXTURES = Path(__file__).parent / "fixtures"
REPLAY = FIXTURES / "replay"

# Common synthetic vocabulary for generated passages.
WORDS = [
    "قال", "الله", "يوم", "الحساب", "الرحمن", "الرحيم", "الناس", "كتاب", "نور",
    "هدى", "الأرض", "السماء", "في", "من", "على", "إلى", "الذين", "آمنوا",
    "عملوا", "الصالحات", "جنات", "تجري", "الأنهار", "خالدين", "فيها", "أبدا",
]


def make_record(pq_id, passage, answers, split="test", source="qrcd", tafsir=None):
    """Record whose answers are located by first occurrence in ``passage``."""
    golds = []
    for text in answers:
        start = passage.find(text)
        assert start >= 0, text
        golds.append(GoldAnswer(text, start))
    return QPARecord(pq_id, passage, "سؤال " + pq_id, tuple(golds), split, source, tafsir)


@pytest.fixture
def replay_corpus() -> Path:
    return REPLAY / "corpus.jsonl"


def qrcd_dir() -> Path | None:
    """Directory holding the QRCDv1.2 JSONL release, if available."""
    path = Path(os.environ.get("QRCD_DIR", Path(__file__).parents[1] / "data" / "qrcd"))
    return path if path.is_dir() else None
