"""Michelson parsing, execution and deductive verification."""

from pathlib import Path

CORPUS = Path(__file__).parent / "corpus"


def corpus_path(name):
    """Path of a bundled example contract, sidecar or golden listing."""
    return CORPUS / name


def corpus_contracts():
    return sorted(CORPUS.glob("*.tz"))
