"""Scoring a predicted ontology against a gold ontology.

Both sides are flattened into label-space triples, deduplicated, and aligned
either by string equality (exact mode) or by per-position embedding
similarity with a one-to-one maximum-cardinality assignment (fuzzy mode).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .backend import EmbeddingBackend
from .model import Ontology

TYPE_PRED = "type"
LABEL_PRED = "label"
COMMENT_PRED = "comment"
SUBCLASS_PRED = "subClassOf"
DOMAIN_PRED = "domain"
RANGE_PRED = "range"
CLASS_OBJ = "Class"
OBJECT_PROPERTY_OBJ = "ObjectProperty"


@dataclass(frozen=True, order=True)
class EvalTriple:
    subject_label: str
    predicate_label: str
    object_label: str

    def __post_init__(self) -> None:
        for part in (self.subject_label, self.predicate_label, self.object_label):
            if not part:
                raise ValueError("eval triple positions must be non-empty")

    def as_list(self) -> list[str]:
        return [self.subject_label, self.predicate_label, self.object_label]


@dataclass
class MatchReport:
    precision: float
    recall: float
    f1: float
    matched: list[tuple[EvalTriple, EvalTriple, float]]
    unmatched_pred: list[EvalTriple]
    unmatched_gold: list[EvalTriple]
    mode: str
    threshold: float | None = None


def to_eval_triples(ontology: Ontology, include_annotations: bool = False) -> list[EvalTriple]:
    """Structural triples in label space, deduplicated and sorted.

    Classes yield a type triple, edges a subClassOf triple, properties type,
    domain and range triples. With include_annotations, label and comment
    triples join in.
    """
    label_of = ontology.label_for
    triples: set[EvalTriple] = set()
    for c in ontology.classes:
        triples.add(EvalTriple(c.label.text, TYPE_PRED, CLASS_OBJ))
        if include_annotations:
            triples.add(EvalTriple(c.label.text, LABEL_PRED, c.label.text))
            if c.description:
                triples.add(EvalTriple(c.label.text, COMMENT_PRED, c.description))
    for e in ontology.hierarchy:
        triples.add(EvalTriple(label_of(e.sub), SUBCLASS_PRED, label_of(e.sup)))
    for p in ontology.properties:
        triples.add(EvalTriple(p.label.text, TYPE_PRED, OBJECT_PROPERTY_OBJ))
        triples.add(EvalTriple(p.label.text, DOMAIN_PRED, label_of(p.domain)))
        triples.add(EvalTriple(p.label.text, RANGE_PRED, label_of(p.range)))
        if include_annotations:
            triples.add(EvalTriple(p.label.text, LABEL_PRED, p.label.text))
            if p.description:
                triples.add(EvalTriple(p.label.text, COMMENT_PRED, p.description))
    return sorted(triples)


def _metrics(n_matched: int, n_pred: int, n_gold: int) -> tuple[float, float, float]:
    """Precision/recall/F1 with the empty-set conventions.

    Both sides empty counts as a perfect score; one empty side scores zero.
    """
    if n_pred == 0 and n_gold == 0:
        return 1.0, 1.0, 1.0
    if n_pred == 0 or n_gold == 0:
        return 0.0, 0.0, 0.0
    precision = n_matched / n_pred
    recall = n_matched / n_gold
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return precision, recall, f1


def _unique_sorted(triples: Iterable[EvalTriple]) -> list[EvalTriple]:
    return sorted(set(triples))


def exact_match_score(pred: Iterable[EvalTriple], gold: Iterable[EvalTriple]) -> MatchReport:
    """Case-sensitive string equality on all three positions."""
    pred_list = _unique_sorted(pred)
    gold_list = _unique_sorted(gold)
    common = sorted(set(pred_list) & set(gold_list))
    precision, recall, f1 = _metrics(len(common), len(pred_list), len(gold_list))
    common_set = set(common)
    return MatchReport(
        precision=precision,
        recall=recall,
        f1=f1,
        matched=[(t, t, 1.0) for t in common],
        unmatched_pred=[t for t in pred_list if t not in common_set],
        unmatched_gold=[t for t in gold_list if t not in common_set],
        mode="exact",
    )


def _hopcroft_karp(n_left: int, adjacency: Sequence[Sequence[int]], n_right: int) -> int:
    """Maximum-cardinality matching size for a bipartite graph."""
    INF = float("inf")
    match_left = [-1] * n_left
    match_right = [-1] * n_right
    dist = [0.0] * n_left

    def bfs() -> bool:
        queue = []
        for u in range(n_left):
            if match_left[u] == -1:
                dist[u] = 0
                queue.append(u)
            else:
                dist[u] = INF
        found = False
        head = 0
        while head < len(queue):
            u = queue[head]
            head += 1
            for v in adjacency[u]:
                w = match_right[v]
                if w == -1:
                    found = True
                elif dist[w] == INF:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        return found

    def dfs(u: int) -> bool:
        for v in adjacency[u]:
            w = match_right[v]
            if w == -1 or (dist[w] == dist[u] + 1 and dfs(w)):
                match_left[u] = v
                match_right[v] = u
                return True
        dist[u] = INF
        return False

    size = 0
    while bfs():
        for u in range(n_left):
            if match_left[u] == -1 and dfs(u):
                size += 1
    return size


def _lex_smallest_maximum_matching(
    n_left: int, adjacency: list[list[int]], n_right: int
) -> list[tuple[int, int]]:
    """Maximum matching whose (left, right) pair sequence is lexicographically
    smallest among all maximum matchings.

    Greedy with an optimality check: pin the smallest feasible partner for
    each left vertex in turn and verify the remainder still reaches the
    optimum cardinality.
    """
    target = _hopcroft_karp(n_left, adjacency, n_right)
    pairs: list[tuple[int, int]] = []
    used_left: set[int] = set()
    used_right: set[int] = set()

    def residual_size(extra_left: int, extra_right: int) -> int:
        left_ids = [u for u in range(n_left) if u not in used_left and u != extra_left]
        right_ids = sorted(set(range(n_right)) - used_right - {extra_right})
        right_index = {v: i for i, v in enumerate(right_ids)}
        sub_adjacency = [
            [right_index[v] for v in adjacency[u] if v in right_index] for u in left_ids
        ]
        return _hopcroft_karp(len(left_ids), sub_adjacency, len(right_ids))

    for u in range(n_left):
        if len(pairs) == target:
            break
        for v in adjacency[u]:
            if v in used_right:
                continue
            if len(pairs) + 1 + residual_size(u, v) == target:
                pairs.append((u, v))
                used_left.add(u)
                used_right.add(v)
                break
    return pairs


def fuzzy_match_score(
    pred: Iterable[EvalTriple],
    gold: Iterable[EvalTriple],
    embedder: EmbeddingBackend,
    threshold: float,
) -> MatchReport:
    """Embedding-based alignment with per-position cosine thresholds.

    A predicted triple is compatible with a gold triple when the cosine
    similarity of subject, predicate and object labels each independently
    reaches the threshold. The matched set is a maximum-cardinality
    one-to-one assignment over compatible pairs, deterministic via
    lexicographically smallest pairing. Each matched pair records its
    weakest position similarity.
    """
    if not (0.0 < threshold <= 1.0):
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    pred_list = _unique_sorted(pred)
    gold_list = _unique_sorted(gold)

    if not pred_list or not gold_list:
        precision, recall, f1 = _metrics(0, len(pred_list), len(gold_list))
        return MatchReport(
            precision=precision,
            recall=recall,
            f1=f1,
            matched=[],
            unmatched_pred=pred_list,
            unmatched_gold=gold_list,
            mode="fuzzy",
            threshold=threshold,
        )

    labels = sorted(
        {part for t in pred_list + gold_list for part in t.as_list()}
    )
    vectors = dict(zip(labels, embedder.embed(labels)))

    sim_cache: dict[tuple[str, str], float] = {}

    def sim(a: str, b: str) -> float:
        if a == b:
            return 1.0
        key = (a, b)
        if key not in sim_cache:
            sim_cache[key] = float(np.dot(vectors[a], vectors[b]))
        return sim_cache[key]

    adjacency: list[list[int]] = []
    scores: dict[tuple[int, int], float] = {}
    for i, p in enumerate(pred_list):
        row: list[int] = []
        for j, g in enumerate(gold_list):
            s = min(
                sim(p.subject_label, g.subject_label),
                sim(p.predicate_label, g.predicate_label),
                sim(p.object_label, g.object_label),
            )
            if s >= threshold:
                row.append(j)
                scores[(i, j)] = s
        adjacency.append(row)

    pairs = _lex_smallest_maximum_matching(len(pred_list), adjacency, len(gold_list))
    matched = [(pred_list[i], gold_list[j], scores[(i, j)]) for i, j in pairs]
    matched_pred = {i for i, _ in pairs}
    matched_gold = {j for _, j in pairs}
    precision, recall, f1 = _metrics(len(pairs), len(pred_list), len(gold_list))
    return MatchReport(
        precision=precision,
        recall=recall,
        f1=f1,
        matched=matched,
        unmatched_pred=[t for i, t in enumerate(pred_list) if i not in matched_pred],
        unmatched_gold=[t for j, t in enumerate(gold_list) if j not in matched_gold],
        mode="fuzzy",
        threshold=threshold,
    )


def report_to_json(use_case: str, report: MatchReport) -> dict:
    """Machine-readable form of one report."""
    return {
        "use_case": use_case,
        "mode": report.mode,
        "threshold": report.threshold,
        "precision": report.precision,
        "recall": report.recall,
        "f1": report.f1,
        "matches": [
            {"pred": p.as_list(), "gold": g.as_list(), "score": score}
            for p, g, score in report.matched
        ],
        "unmatched_pred": [t.as_list() for t in report.unmatched_pred],
        "unmatched_gold": [t.as_list() for t in report.unmatched_gold],
    }


def render_report(reports: Mapping[str, MatchReport]) -> tuple[str, list[dict]]:
    """Plain-text table (3 decimal places) plus the JSON report list."""
    names = sorted(reports)
    width = max([len("Use case")] + [len(n) for n in names])
    header = f"{'Use case':<{width}}  {'Precision':>9}  {'Recall':>6}  {'F1':>5}"
    lines = [header]
    for name in names:
        r = reports[name]
        lines.append(
            f"{name:<{width}}  {r.precision:>9.3f}  {r.recall:>6.3f}  {r.f1:>5.3f}"
        )
    return "\n".join(lines) + "\n", [report_to_json(n, reports[n]) for n in names]


def write_report_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")
