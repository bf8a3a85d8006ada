"""Taxonomy induction from pairwise subsumption judgments.

Judgments come back from the model one ordered pair at a time; assembly is
a pure, deterministic function that drops mutual subsumptions, rejects
cycle-forming edges, and transitively reduces the result. Whatever the
verdicts claim, the output hierarchy is a reduced DAG.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Iterable, Sequence

from pydantic import BaseModel, ConfigDict, model_validator

from .backend import ChatRequest, LlmBackend, request_validated
from .model import Iri, OntologyClass, SubclassEdge
from .prompts import load_prompt

logger = logging.getLogger(__name__)

#: Strict wire shape of a subsumption verdict.
VERDICT_RESPONSE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["holds", "rationale"],
    "properties": {
        "holds": {"type": "boolean"},
        "rationale": {"type": "string"},
    },
}


@dataclass(frozen=True)
class SubsumptionQuery:
    sub_label: str
    sub_description: str
    sup_label: str
    sup_description: str

    def __post_init__(self) -> None:
        if self.sub_label == self.sup_label:
            raise ValueError(f"query compares a class with itself: {self.sub_label!r}")


class _VerdictPayload(BaseModel):
    model_config = ConfigDict(extra="forbid")

    holds: bool
    rationale: str

    @model_validator(mode="after")
    def _rationale_required_when_positive(self) -> "_VerdictPayload":
        if self.holds and not self.rationale.strip():
            raise ValueError("a positive verdict needs a non-empty rationale")
        return self


@dataclass(frozen=True)
class SubsumptionVerdict:
    query: SubsumptionQuery
    holds: bool
    rationale: str


@dataclass(frozen=True)
class Conflict:
    kind: str  # "MUTUAL" or "CYCLE_REJECTED"
    labels: tuple[str, ...]
    dropped: tuple[tuple[str, str], ...]


def generate_candidate_pairs(
    classes: Sequence[OntologyClass], cap: int
) -> list[SubsumptionQuery]:
    """All ordered pairs of non-datatype classes, sorted by (sub, sup) label.

    Truncates at `cap` with a warning. Fewer than two classes yields an
    empty list.
    """
    eligible = sorted(
        (c for c in classes if not c.is_reified_datatype), key=lambda c: c.label.text
    )
    queries: list[SubsumptionQuery] = []
    for sub in eligible:
        for sup in eligible:
            if sub.label.text == sup.label.text:
                continue
            queries.append(
                SubsumptionQuery(
                    sub_label=sub.label.text,
                    sub_description=sub.description,
                    sup_label=sup.label.text,
                    sup_description=sup.description,
                )
            )
    if len(queries) > cap:
        logger.warning(
            "candidate pairs truncated from %d to %d; raise max_entailment_pairs to cover all",
            len(queries),
            cap,
        )
        queries = queries[:cap]
    return queries


def _query_content(q: SubsumptionQuery) -> str:
    return (
        f"Subclass candidate: {q.sub_label}\n"
        f"Description: {q.sub_description or '(none)'}\n\n"
        f"Superclass candidate: {q.sup_label}\n"
        f"Description: {q.sup_description or '(none)'}"
    )


def judge_subsumption(
    q: SubsumptionQuery, backend: LlmBackend, model: str, max_retries: int = 2
) -> SubsumptionVerdict:
    """Ask the model whether sub is subsumed by sup, with schema repair retries."""
    prompt = load_prompt("entailment_system")
    req = ChatRequest(
        model=model,
        system_prompt=prompt.text,
        user_content=_query_content(q),
        response_schema=VERDICT_RESPONSE_SCHEMA,
    )
    payload, retries = request_validated(backend, req, _VerdictPayload.model_validate)
    if retries:
        logger.info("pair (%s, %s): verdict needed %d repair retries", q.sub_label, q.sup_label, retries)
    return SubsumptionVerdict(query=q, holds=payload.holds, rationale=payload.rationale)


def _reaches(adjacency: dict[str, set[str]], start: str, goal: str) -> bool:
    stack = list(adjacency.get(start, ()))
    seen: set[str] = set()
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(adjacency.get(node, ()))
    return False


def build_hierarchy(
    verdicts: Iterable[SubsumptionVerdict], classes: Sequence[OntologyClass]
) -> tuple[set[SubclassEdge], list[Conflict]]:
    """Assemble a reduced DAG of subclass edges out of the verdicts.

    Three passes, all deterministic regardless of verdict order:
    1. mutual subsumptions (both directions positive) drop both edges,
    2. remaining positive edges insert in sorted order; an edge that would
       close a cycle is rejected,
    3. transitive reduction removes edges already implied by longer paths.

    Edges involving reified datatype classes are discarded up front. Verdict
    labels must resolve to the supplied classes. Duplicate verdicts for the
    same ordered pair: the last one wins.
    """
    iri_by_label: dict[str, Iri] = {}
    datatype_labels: set[str] = set()
    for c in classes:
        iri_by_label[c.label.text] = c.iri
        if c.is_reified_datatype:
            datatype_labels.add(c.label.text)

    judged: dict[tuple[str, str], bool] = {}
    for v in verdicts:
        judged[(v.query.sub_label, v.query.sup_label)] = v.holds

    for sub, sup in judged:
        for label in (sub, sup):
            if label not in iri_by_label:
                raise ValueError(f"verdict references unknown class label: {label!r}")

    positive = {
        pair
        for pair, holds in judged.items()
        if holds and not (pair[0] in datatype_labels or pair[1] in datatype_labels)
    }

    conflicts: list[Conflict] = []
    mutual_pairs = sorted({tuple(sorted(p)) for p in positive if (p[1], p[0]) in positive})
    for a, b in mutual_pairs:
        conflicts.append(Conflict("MUTUAL", (a, b), ((a, b), (b, a))))
        positive.discard((a, b))
        positive.discard((b, a))

    adjacency: dict[str, set[str]] = {}
    accepted: list[tuple[str, str]] = []
    for sub, sup in sorted(positive):
        if _reaches(adjacency, sup, sub):
            conflicts.append(Conflict("CYCLE_REJECTED", (sub, sup), ((sub, sup),)))
            continue
        adjacency.setdefault(sub, set()).add(sup)
        accepted.append((sub, sup))

    reduced: set[SubclassEdge] = set()
    for sub, sup in accepted:
        implied = any(
            other != sup and _reaches(adjacency, other, sup) for other in adjacency.get(sub, ())
        )
        if not implied:
            reduced.add(SubclassEdge(iri_by_label[sub], iri_by_label[sup]))

    return reduced, conflicts
