"""Extractive question answering over Qur'anic passages: corpus handling,
few-shot prompting, span alignment, post-processing and pAP@k scoring."""

__version__ = "0.1.0"
