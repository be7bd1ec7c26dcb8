import json
from pathlib import Path

import pytest

from litmine.corpus import Document, load_corpus

DATA_DIR = Path(__file__).parent / "data"


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


@pytest.fixture(scope="session")
def minicorpus_path() -> Path:
    return DATA_DIR / "minicorpus.jsonl"


@pytest.fixture(scope="session")
def minicorpus_store(minicorpus_path):
    return load_corpus(minicorpus_path)


@pytest.fixture(scope="session")
def minicorpus_manifest():
    with open(DATA_DIR / "minicorpus_manifest.json", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture()
def write_jsonl(tmp_path):
    """Factory writing a list of dicts as a JSONL file; returns its path."""

    def _write(records, name="corpus.jsonl"):
        path = tmp_path / name
        with open(path, "w", encoding="utf-8") as fh:
            for record in records:
                if isinstance(record, str):
                    fh.write(record + "\n")
                else:
                    fh.write(json.dumps(record, ensure_ascii=False) + "\n")
        return path

    return _write


@pytest.fixture()
def make_doc():
    """Document factory with compact defaults."""

    def _make(doc_id="d1", title="A Title", abstract="Some abstract text.", **kw):
        return Document(id=doc_id, title=title, abstract=abstract, **kw)

    return _make
