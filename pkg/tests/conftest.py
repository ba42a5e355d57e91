from importlib.resources import files

import pytest

from nsg.corpus import load_corpus


@pytest.fixture(scope="session")
def mini_corpus_path() -> str:
    return str(files("nsg").joinpath("data/mini_corpus.jsonl"))


@pytest.fixture(scope="session")
def mini_corpus(mini_corpus_path):
    return load_corpus(mini_corpus_path)
