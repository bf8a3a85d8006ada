#!/usr/bin/env python3
"""Regenerate the committed replay fixtures.

Produces tests/fixtures/data_build.cassette.jsonl and
tests/fixtures/data_build.golden.ttl by running the pipeline over the
bundled data-sector excerpt with a deterministic rule-based backend wrapped
in a recorder, then verifies that replaying the cassette reproduces the
golden output byte for byte.

Run from the repository root after changing prompts, models, request
shapes, or the excerpt itself:

    python3 scripts/make_fixtures.py
"""

from __future__ import annotations

import json
import re
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from ontoekg.backend import (  # noqa: E402
    Cassette,
    ChatRequest,
    ChatResponse,
    LlmBackend,
    RecordingChatBackend,
    ReplayChatBackend,
    _validated_response,
)
from ontoekg.config import load_config  # noqa: E402
from ontoekg.ingest import load_corpus  # noqa: E402
from ontoekg.pipeline import build, write_build_outputs  # noqa: E402

EXCERPT = REPO / "corpus" / "data" / "data_governance.txt"
CASSETTE = REPO / "tests" / "fixtures" / "data_build.cassette.jsonl"
GOLDEN = REPO / "tests" / "fixtures" / "data_build.golden.ttl"

EXTRACTION_ANSWER = {
    "classes": [
        {"label": "Policy", "description": "A formal statement of rules adopted by the company."},
        {"label": "GovernanceStandard", "description": "A corporate standard adopted by the board that policies and datasets must comply with."},
        {"label": "Employee", "description": "A person employed by the company."},
        {"label": "Data Steward", "description": "An employee accountable for the quality and lifecycle of the datasets they own."},
        {"label": "Dataset", "description": "A collection of data registered in the data catalogue."},
        {"label": "Access Request", "description": "A request for access to a restricted dataset."},
        {"label": "Retention Schedule", "description": "A policy stating how long a dataset is retained before archiving or destruction."},
    ],
    "properties": [
        {"label": "compliesWith", "description": "A policy conforms to a governance standard.", "domain": "Policy", "range": "GovernanceStandard"},
        {"label": "owns", "description": "A data steward is accountable for a dataset.", "domain": "Data Steward", "range": "Dataset"},
        {"label": "submits", "description": "An employee files an access request.", "domain": "Employee", "range": "Access Request"},
        {"label": "hasRetentionPeriod", "description": "The retention period of a schedule, in years.", "domain": "Retention Schedule", "range": "string"},
        {"label": "approves", "description": "The governance board decides on an access request.", "domain": "Governance Board", "range": "Access Request"},
    ],
}

TRUE_PAIRS = {
    ("Data Steward", "Employee"),
    ("GovernanceStandard", "Policy"),
    ("Retention Schedule", "Policy"),
}

_SUB_RE = re.compile(r"^Subclass candidate: (.+)$", re.MULTILINE)
_SUP_RE = re.compile(r"^Superclass candidate: (.+)$", re.MULTILINE)


class RuleBackend(LlmBackend):
    """Answers extraction requests with the canned schema and verdict
    requests from the TRUE_PAIRS lookup."""

    mode = "mock"

    def complete(self, req: ChatRequest) -> ChatResponse:
        properties = dict(req.response_schema).get("properties", {})
        if "classes" in properties:
            content = json.dumps(EXTRACTION_ANSWER)
        else:
            sub = _SUB_RE.search(req.user_content).group(1)
            sup = _SUP_RE.search(req.user_content).group(1)
            holds = (sub, sup) in TRUE_PAIRS
            rationale = f"Every {sub} is by definition a {sup}." if holds else ""
            content = json.dumps({"holds": holds, "rationale": rationale})
        return _validated_response(content, req.response_schema, {})


def main() -> None:
    cfg = load_config(max_concurrent_requests=1)
    documents = load_corpus(EXCERPT)

    cassette = Cassette.for_record(CASSETTE)
    recorder = RecordingChatBackend(RuleBackend(), cassette)
    result = build(documents, cfg, recorder, llm_mode="record")
    GOLDEN.write_text(result.turtle_text, encoding="utf-8", newline="\n")

    replayed = build(
        documents, cfg, ReplayChatBackend(Cassette.for_replay(CASSETTE)), llm_mode="replay"
    )
    if replayed.turtle_text != result.turtle_text:
        raise SystemExit("replayed output does not match the recorded run")

    out_dir = REPO / "build" / "fixture_check"
    write_build_outputs(replayed, out_dir / "data.ttl")

    counts = result.manifest["counts"]
    print(f"wrote {CASSETTE.relative_to(REPO)} ({sum(1 for _ in CASSETTE.open())} entries)")
    print(f"wrote {GOLDEN.relative_to(REPO)} "
          f"({counts['classes']} classes, {counts['properties']} properties, {counts['edges']} edges)")
    print(f"violations in golden run: {result.manifest['violations'] or 'none'}")


if __name__ == "__main__":
    main()
