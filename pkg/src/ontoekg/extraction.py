"""Schema-constrained extraction of class and property candidates.

The wire schema is strict: unknown fields are rejected so that repair
retries converge. Downstream of the raw model output sit two repair passes,
datatype reification and reference resolution, which together guarantee
that every property's domain and range resolves to a class candidate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from pydantic import BaseModel, ConfigDict, field_validator

from .backend import ChatRequest, LlmBackend, request_validated
from .config import PipelineConfig
from .ingest import Document, window
from .model import Label, normalize_label
from .prompts import load_prompt

logger = logging.getLogger(__name__)

#: Strict wire shape of an extraction response. Kept hand-written so the
#: cassette keys stay stable across library upgrades.
EXTRACTION_RESPONSE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["classes", "properties"],
    "properties": {
        "classes": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["label", "description"],
                "properties": {
                    "label": {"type": "string"},
                    "description": {"type": "string"},
                },
            },
        },
        "properties": {
            "type": "array",
            "items": {
                "type": "object",
                "additionalProperties": False,
                "required": ["label", "description", "domain", "range"],
                "properties": {
                    "label": {"type": "string"},
                    "description": {"type": "string"},
                    "domain": {"type": "string"},
                    "range": {"type": "string"},
                },
            },
        },
    },
}

#: Lowercased datatype names and the reified class label each one becomes.
DATATYPE_LEXICON = {
    "string": "Text",
    "text": "Text",
    "integer": "Number",
    "int": "Number",
    "number": "Number",
    "decimal": "Float",
    "float": "Float",
    "boolean": "Boolean",
    "date": "Date",
    "datetime": "DateTime",
    "url": "URL",
    "uri": "URL",
}


def _require_valid_label(value: str) -> str:
    Label(value)  # raises ValueError with a useful message
    return value


class ClassCandidate(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    label: str
    description: str

    _label_ok = field_validator("label")(_require_valid_label)


class PropertyCandidate(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    label: str
    description: str
    domain: str
    range: str

    _label_ok = field_validator("label", "domain", "range")(_require_valid_label)


class ExtractionResult(BaseModel):
    model_config = ConfigDict(extra="forbid")

    classes: list[ClassCandidate]
    properties: list[PropertyCandidate]


class RepairPolicy(str, Enum):
    AUTO_ADD = "auto_add"
    DROP = "drop"


@dataclass(frozen=True)
class Repair:
    kind: str  # "AUTO_ADD" or "DROP"
    property_label: str
    missing_label: str


def extract_schema(doc: Document, backend: LlmBackend, cfg: PipelineConfig) -> ExtractionResult:
    """Extract candidates from one document, windowing oversized text.

    Per-window results are concatenated; duplicate folding happens later in
    merge_candidates. Raises SchemaFailureError when a window's output never
    validates, BackendError on transport problems.
    """
    prompt = load_prompt("extraction_system")
    classes: list[ClassCandidate] = []
    properties: list[PropertyCandidate] = []
    for segment in window(doc, cfg.max_chars_per_request):
        req = ChatRequest(
            model=cfg.extraction_model,
            system_prompt=prompt.text,
            user_content=segment,
            response_schema=EXTRACTION_RESPONSE_SCHEMA,
        )
        result, retries = request_validated(backend, req, ExtractionResult.model_validate)
        if retries:
            logger.info("document %s: extraction needed %d repair retries", doc.id, retries)
        classes.extend(result.classes)
        properties.extend(result.properties)
    return ExtractionResult(classes=classes, properties=properties)


def merge_candidates(results: Iterable[ExtractionResult]) -> ExtractionResult:
    """Fold duplicate candidates across windows and documents.

    Classes collide on the normalized label, properties on the normalized
    (label, domain, range) key. The first spelling wins; the longest
    description wins, first seen on equal length.
    """
    classes: dict[str, ClassCandidate] = {}
    for result in results:
        for c in result.classes:
            key = normalize_label(c.label)
            seen = classes.get(key)
            if seen is None:
                classes[key] = c
            elif len(c.description) > len(seen.description):
                classes[key] = ClassCandidate(label=seen.label, description=c.description)

    properties: dict[tuple[str, str, str], PropertyCandidate] = {}
    for result in results:
        for p in result.properties:
            key = (normalize_label(p.label), normalize_label(p.domain), normalize_label(p.range))
            seen = properties.get(key)
            if seen is None:
                properties[key] = p
            elif len(p.description) > len(seen.description):
                properties[key] = PropertyCandidate(
                    label=seen.label,
                    description=p.description,
                    domain=seen.domain,
                    range=seen.range,
                )

    return ExtractionResult(classes=list(classes.values()), properties=list(properties.values()))


def reify_datatypes(result: ExtractionResult) -> ExtractionResult:
    """Turn datatype-valued ranges into first-class classes.

    Property ranges found in the datatype lexicon are rewritten to the
    canonical class label (Text, Number, ...) and the class is created if
    missing. Idempotent.
    """
    needed: set[str] = set()
    properties: list[PropertyCandidate] = []
    for p in result.properties:
        canonical = DATATYPE_LEXICON.get(p.range.strip().lower())
        if canonical is None:
            properties.append(p)
            continue
        needed.add(canonical)
        properties.append(
            PropertyCandidate(label=p.label, description=p.description, domain=p.domain, range=canonical)
        )

    classes = list(result.classes)
    present = {normalize_label(c.label) for c in classes}
    for canonical in sorted(needed):
        if normalize_label(canonical) not in present:
            classes.append(ClassCandidate(label=canonical, description=""))
    return ExtractionResult(classes=classes, properties=properties)


def resolve_references(
    result: ExtractionResult, policy: RepairPolicy = RepairPolicy.AUTO_ADD
) -> tuple[list[ClassCandidate], list[PropertyCandidate], list[Repair]]:
    """Make every property's domain and range resolve to a class candidate.

    AUTO_ADD creates missing classes with an empty description; DROP removes
    the offending property. Label matching ignores case and non-alphanumeric
    characters. Every repair is recorded.
    """
    classes = list(result.classes)
    known = {normalize_label(c.label) for c in classes}
    properties: list[PropertyCandidate] = []
    repairs: list[Repair] = []

    for p in result.properties:
        missing = [ref for ref in (p.domain, p.range) if normalize_label(ref) not in known]
        # a property with domain == range reports the reference once
        missing = list(dict.fromkeys(missing))
        if not missing:
            properties.append(p)
            continue
        if policy is RepairPolicy.AUTO_ADD:
            for ref in missing:
                classes.append(ClassCandidate(label=ref, description=""))
                known.add(normalize_label(ref))
                repairs.append(Repair("AUTO_ADD", p.label, ref))
            properties.append(p)
        else:
            for ref in missing:
                repairs.append(Repair("DROP", p.label, ref))

    return classes, properties, repairs
