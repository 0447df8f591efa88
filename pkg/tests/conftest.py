from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from semportal import markup
from semportal.portal import Portal, PortalConfig

REPO = Path(__file__).resolve().parent.parent
CORPUS = REPO / "fixtures" / "corpus"
QUERIES = REPO / "fixtures" / "queries"
SCAN_SCRIPT = REPO / "scripts" / "scan_fixtures.py"


@pytest.fixture(scope="session")
def corpus_sources() -> dict[str, str]:
    return {
        p.name: p.read_text(encoding="utf-8") for p in sorted(CORPUS.glob("*.stx"))
    }


@pytest.fixture(scope="session")
def corpus_asts(corpus_sources) -> dict[str, markup.DocumentAST]:
    return {
        name: markup.parse_text(name, text) for name, text in corpus_sources.items()
    }


@pytest.fixture(scope="session")
def corpus_registry(corpus_asts) -> markup.SymbolRegistry:
    registry = markup.SymbolRegistry()
    for ast in corpus_asts.values():
        registry.add_ast(ast)
    return registry


@pytest.fixture(scope="session")
def corpus_linked(corpus_asts, corpus_registry):
    return {
        name: markup.link_document(ast, corpus_registry)
        for name, ast in corpus_asts.items()
    }


@pytest.fixture(scope="session")
def scan_report() -> dict:
    """Live output of the independent line-scanning oracle script."""
    out = subprocess.run(
        [sys.executable, str(SCAN_SCRIPT), str(CORPUS)],
        check=True,
        capture_output=True,
        text=True,
    )
    return json.loads(out.stdout)


@pytest.fixture()
def portal(tmp_path) -> Portal:
    return Portal(PortalConfig(data_dir=str(tmp_path / "data"), write_token="tok"))


@pytest.fixture()
def loaded_portal(portal) -> Portal:
    reports = portal.ingest_corpus(CORPUS, author="tests", message="fixture corpus")
    assert all(r.status == "ok" for r in reports)
    return portal
