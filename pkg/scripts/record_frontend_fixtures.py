#!/usr/bin/env python3
"""Record portal HTTP responses for the frontend test suite.

Boots a portal over the fixture corpus and captures genuine wire bodies for
the routes the browser client consumes, so the client tests run against real
server output rather than hand-written imitations.

Usage: python scripts/record_frontend_fixtures.py [output.json]
"""

from __future__ import annotations

import json
import sys
import tempfile
from pathlib import Path

from fastapi.testclient import TestClient

from semportal.portal import Portal, PortalConfig, create_app

REPO = Path(__file__).resolve().parent.parent


def main() -> int:
    out_path = Path(
        sys.argv[1] if len(sys.argv) > 1 else REPO / "frontend" / "test" / "fixtures" / "recorded.json"
    )
    with tempfile.TemporaryDirectory() as tmp:
        portal = Portal(PortalConfig(data_dir=tmp, write_token="tok"))
        reports = portal.ingest_corpus(REPO / "fixtures" / "corpus", "recorder", "fixtures")
        assert all(r.status == "ok" for r in reports)
        client = TestClient(create_app(portal))
        revision = portal.state.doc_revs["nat.stx"]

        thread = client.post(
            "/threads",
            json={
                "anchor": {"doc": "nat.stx", "revision": revision, "fragment": "nat.stx!0.2"},
                "title": "about sums",
                "body": "is this primitive recursion?",
                "author": "reader",
            },
            headers={"X-Write-Token": "tok"},
        )
        assert thread.status_code == 201

        subterm_fragment = "nat.stx!0.2.3.0"  # head of the plus formula
        statement_fragment = "nat.stx!0.2"
        recording = {
            "doc": {
                "path": "nat.stx",
                "unfolded": client.get("/doc/nat.stx").text,
                "folded": {
                    statement_fragment: client.get(
                        "/doc/nat.stx",
                        headers={"X-Session": _fold(client, statement_fragment)},
                    ).text
                },
            },
            "services": {
                fragment: client.get("/services", params={"fragment": fragment}).json()
                for fragment in [
                    "nat.stx!",  # document
                    "nat.stx!0",  # module
                    statement_fragment,  # statement
                    "nat.stx!0.2.3",  # formula
                    subterm_fragment,  # subterm (apply head)
                    "nat.stx!0.2.1",  # symbol occurrence (definiendum)
                ]
            },
            "definition": {
                "//nat#nat/plus": client.get(
                    "/definition", params={"symbol": "//nat#nat/plus"}
                ).text
            },
            "prereq_svg": {
                "//int": client.get(
                    "/prereq", params={"uri": "//int", "format": "svg"}
                ).text,
                "//nat#nat/plus": client.get(
                    "/prereq", params={"uri": "//nat#nat/plus", "format": "svg"}
                ).text,
            },
            "threads": {
                "nat.stx": client.get("/threads", params={"doc": "nat.stx"}).json(),
                statement_fragment: client.get(
                    "/threads", params={"fragment": statement_fragment}
                ).json(),
            },
        }
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_text(json.dumps(recording, indent=2, ensure_ascii=False) + "\n")
    print(f"wrote {out_path}")
    return 0


def _fold(client: TestClient, fragment: str) -> str:
    response = client.post("/folds", json={"fragment": fragment, "folded": True})
    assert response.status_code == 200
    return response.headers["x-session"]


if __name__ == "__main__":
    raise SystemExit(main())
