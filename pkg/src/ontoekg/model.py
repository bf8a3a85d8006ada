"""Core ontology model: labels, IRIs, classes, properties, and structural validation.

Everything here is a plain value type. The pipeline assembles an `Ontology`
from extraction and entailment output and then runs `validate_ontology` over
it; validation never raises, it reports. Strict callers decide what to do
with the violations (see `fatal_violations`).
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Set

_IRI_RE = re.compile(r"^[A-Za-z][A-Za-z0-9+.\-]*:\S+$")
_WORD_RE = re.compile(r"[^\W_]+", re.UNICODE)

DEFAULT_BASE_IRI = "https://example.org/onto#"


@dataclass(frozen=True, order=True)
class Label:
    """Human-readable term attached to a class or property."""

    text: str

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("label must be non-empty")
        if not _WORD_RE.search(self.text):
            raise ValueError(f"label needs at least one alphanumeric character: {self.text!r}")


@dataclass(frozen=True, order=True)
class Iri:
    """Absolute IRI (scheme required, no whitespace)."""

    value: str

    def __post_init__(self) -> None:
        if not _IRI_RE.match(self.value):
            raise ValueError(f"not an absolute IRI: {self.value!r}")


@dataclass(frozen=True)
class OntologyClass:
    iri: Iri
    label: Label
    description: str = ""
    is_reified_datatype: bool = False


@dataclass(frozen=True)
class OntologyProperty:
    iri: Iri
    label: Label
    description: str
    domain: Iri
    range: Iri


@dataclass(frozen=True, order=True)
class SubclassEdge:
    """Directed subclass assertion: every member of `sub` is a member of `sup`."""

    sub: Iri
    sup: Iri

    def __post_init__(self) -> None:
        if self.sub == self.sup:
            raise ValueError(f"self subclass edge is not allowed: {self.sub.value}")


@dataclass
class Ontology:
    """A T-Box: classes, object properties, and a subclass hierarchy.

    The container itself does not enforce the hierarchy invariants (acyclic,
    transitively reduced, resolvable endpoints); parsed input may violate
    them and `validate_ontology` is the reporting tool.
    """

    base_iri: Iri
    classes: list[OntologyClass] = field(default_factory=list)
    properties: list[OntologyProperty] = field(default_factory=list)
    hierarchy: set[SubclassEdge] = field(default_factory=set)

    def class_map(self) -> dict[Iri, OntologyClass]:
        return {c.iri: c for c in self.classes}

    def label_for(self, iri: Iri) -> str:
        """Class/property label text, falling back to the IRI local name."""
        for c in self.classes:
            if c.iri == iri:
                return c.label.text
        for p in self.properties:
            if p.iri == iri:
                return p.label.text
        return local_name(iri)


def local_name(iri: Iri) -> str:
    """Fragment after '#', else the last path segment."""
    value = iri.value
    if "#" in value:
        return value.rsplit("#", 1)[1]
    return value.rstrip("/").rsplit("/", 1)[-1]


def normalize_label(text: str) -> str:
    """Case-insensitive comparison key: lowercase, alphanumerics only."""
    return "".join(ch for ch in text.lower() if ch.isalnum())


def _mint_unique(base: Iri, local: str, taken: Set[Iri]) -> Iri:
    candidate = Iri(base.value + local)
    if candidate not in taken:
        return candidate
    n = 2
    while True:
        candidate = Iri(f"{base.value}{local}{n}")
        if candidate not in taken:
            return candidate
        n += 1


def mint_class_iri(base: Iri, label: Label, taken: Set[Iri]) -> Iri:
    """Deterministic class IRI: base + PascalCase local name, suffixed on collision."""
    words = _WORD_RE.findall(label.text)
    local = "".join(w[:1].upper() + w[1:] for w in words)
    return _mint_unique(base, local, taken)


def mint_property_iri(base: Iri, label: Label, taken: Set[Iri]) -> Iri:
    """Deterministic property IRI: base + camelCase local name, suffixed on collision."""
    words = _WORD_RE.findall(label.text)
    head = words[0][:1].lower() + words[0][1:]
    tail = "".join(w[:1].upper() + w[1:] for w in words[1:])
    return _mint_unique(base, head + tail, taken)


class ViolationCode(str, Enum):
    CYCLE = "CYCLE"
    DANGLING_REF = "DANGLING_REF"
    REDUNDANT_EDGE = "REDUNDANT_EDGE"
    AMBIGUOUS_PROPERTY = "AMBIGUOUS_PROPERTY"
    SUSPECTED_INDIVIDUAL = "SUSPECTED_INDIVIDUAL"


#: Codes that strict mode treats as fatal.
FATAL_CODES = frozenset({ViolationCode.CYCLE, ViolationCode.DANGLING_REF})

#: Property labels that shadow built-in RDF semantics (compared normalized).
AMBIGUOUS_PROPERTY_LABELS = frozenset({"istypeof", "subclassof", "instanceof", "isa"})


@dataclass(frozen=True)
class Violation:
    code: ViolationCode
    iris: tuple[str, ...]
    message: str


class ValidationFailure(Exception):
    """Fatal structural violations in strict mode."""

    def __init__(self, violations: list[Violation]):
        self.violations = violations
        detail = "; ".join(v.message for v in violations) or "validation failed"
        super().__init__(detail)


def fatal_violations(violations: Iterable[Violation]) -> list[Violation]:
    return [v for v in violations if v.code in FATAL_CODES]


def _reaches(adjacency: dict[Iri, set[Iri]], start: Iri, goal: Iri) -> bool:
    """True when a path of length >= 1 leads from start to goal."""
    stack = list(adjacency.get(start, ()))
    seen: set[Iri] = set()
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        if node in seen:
            continue
        seen.add(node)
        stack.extend(adjacency.get(node, ()))
    return False


def _cycle_components(edges: list[SubclassEdge]) -> list[tuple[Iri, ...]]:
    adjacency: dict[Iri, set[Iri]] = {}
    for e in edges:
        adjacency.setdefault(e.sub, set()).add(e.sup)
    nodes = sorted({e.sub for e in edges} | {e.sup for e in edges})
    cyclic = [n for n in nodes if _reaches(adjacency, n, n)]
    components: list[tuple[Iri, ...]] = []
    assigned: set[Iri] = set()
    for n in cyclic:
        if n in assigned:
            continue
        members = [
            m
            for m in cyclic
            if m == n or (_reaches(adjacency, n, m) and _reaches(adjacency, m, n))
        ]
        assigned.update(members)
        components.append(tuple(sorted(members)))
    return components


def validate_ontology(ontology: Ontology) -> list[Violation]:
    """Structural checks. Returns violations instead of raising.

    CYCLE and DANGLING_REF make the ontology unusable for serialization in
    strict mode; REDUNDANT_EDGE, AMBIGUOUS_PROPERTY and SUSPECTED_INDIVIDUAL
    are quality warnings.
    """
    violations: list[Violation] = []
    class_iris = {c.iri for c in ontology.classes}
    edges = sorted(ontology.hierarchy)
    adjacency: dict[Iri, set[Iri]] = {}
    for e in edges:
        adjacency.setdefault(e.sub, set()).add(e.sup)

    for component in _cycle_components(edges):
        names = ", ".join(i.value for i in component)
        violations.append(
            Violation(
                ViolationCode.CYCLE,
                tuple(i.value for i in component),
                f"subclass cycle among: {names}",
            )
        )

    for e in edges:
        for endpoint in (e.sub, e.sup):
            if endpoint not in class_iris:
                violations.append(
                    Violation(
                        ViolationCode.DANGLING_REF,
                        (e.sub.value, e.sup.value, endpoint.value),
                        f"subclass edge endpoint is not a declared class: {endpoint.value}",
                    )
                )
    for p in sorted(ontology.properties, key=lambda p: p.iri):
        for role, target in (("domain", p.domain), ("range", p.range)):
            if target not in class_iris:
                violations.append(
                    Violation(
                        ViolationCode.DANGLING_REF,
                        (p.iri.value, target.value),
                        f"property {role} is not a declared class: {target.value}",
                    )
                )

    for e in edges:
        without = {k: set(v) for k, v in adjacency.items()}
        without[e.sub].discard(e.sup)
        if _reaches(without, e.sub, e.sup):
            violations.append(
                Violation(
                    ViolationCode.REDUNDANT_EDGE,
                    (e.sub.value, e.sup.value),
                    f"edge implied transitively: {e.sub.value} -> {e.sup.value}",
                )
            )

    for p in sorted(ontology.properties, key=lambda p: p.iri):
        if normalize_label(p.label.text) in AMBIGUOUS_PROPERTY_LABELS:
            violations.append(
                Violation(
                    ViolationCode.AMBIGUOUS_PROPERTY,
                    (p.iri.value,),
                    f"property label shadows RDF semantics: {p.label.text!r}",
                )
            )

    for c in sorted(ontology.classes, key=lambda c: c.iri):
        words = c.label.text.split()
        if (
            not c.is_reified_datatype
            and len(words) >= 2
            and all(w[:1].isupper() for w in words)
            and not c.description.strip()
        ):
            violations.append(
                Violation(
                    ViolationCode.SUSPECTED_INDIVIDUAL,
                    (c.iri.value,),
                    f"class label looks like a proper noun (advisory): {c.label.text!r}",
                )
            )

    violations.sort(key=lambda v: (v.code.value, v.iris))
    return violations
