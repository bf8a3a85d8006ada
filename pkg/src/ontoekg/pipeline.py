"""End-to-end orchestration: ingest, extract, entail, assemble, serialize.

`build` is literally the composition of the two stage functions, so running
the stages separately over the intermediate JSON artifact produces the same
ontology as a single build run.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Sequence

from .backend import LlmBackend
from .config import PipelineConfig
from .entailment import (
    Conflict,
    SubsumptionVerdict,
    build_hierarchy,
    generate_candidate_pairs,
    judge_subsumption,
)
from .extraction import (
    ClassCandidate,
    ExtractionResult,
    PropertyCandidate,
    Repair,
    RepairPolicy,
    extract_schema,
    merge_candidates,
    reify_datatypes,
    resolve_references,
)
from .ingest import Document
from .model import (
    Iri,
    Label,
    Ontology,
    OntologyClass,
    OntologyProperty,
    Violation,
    fatal_violations,
    mint_class_iri,
    mint_property_iri,
    normalize_label,
    validate_ontology,
)
from .prompts import load_prompt
from .turtle import DATATYPE_CLASS_LABELS, emit_turtle, to_triples

logger = logging.getLogger(__name__)

ARTIFACT_VERSION = 1


@dataclass
class ExtractArtifact:
    """Intermediate JSON artifact between the extract and entail stages."""

    documents: list[dict[str, Any]]
    classes: list[ClassCandidate]
    properties: list[PropertyCandidate]
    repairs: list[dict[str, Any]]

    def to_json(self) -> dict[str, Any]:
        return {
            "version": ARTIFACT_VERSION,
            "documents": self.documents,
            "classes": [c.model_dump() for c in self.classes],
            "properties": [p.model_dump() for p in self.properties],
            "repairs": self.repairs,
        }

    @classmethod
    def from_json(cls, data: dict[str, Any]) -> "ExtractArtifact":
        return cls(
            documents=list(data.get("documents", [])),
            classes=[ClassCandidate.model_validate(c) for c in data.get("classes", [])],
            properties=[PropertyCandidate.model_validate(p) for p in data.get("properties", [])],
            repairs=list(data.get("repairs", [])),
        )


@dataclass
class BuildResult:
    ontology: Ontology
    turtle_text: str
    violations: list[Violation]
    conflicts: list[Conflict]
    repairs: list[dict[str, Any]]
    verdicts: list[SubsumptionVerdict]
    manifest: dict[str, Any]

    def has_fatal_problems(self) -> bool:
        """Strict mode fails on fatal violations or on entailment conflicts.

        Assembly already refuses cycle-forming edges, so a conflict is the
        strict-mode signal that the model produced an inconsistent taxonomy.
        """
        return bool(fatal_violations(self.violations)) or bool(self.conflicts)


def _repair_record(doc_id: str, repair: Repair) -> dict[str, Any]:
    return {
        "document": doc_id,
        "kind": repair.kind,
        "property": repair.property_label,
        "missing": repair.missing_label,
    }


def extract_stage(
    documents: Sequence[Document], cfg: PipelineConfig, backend: LlmBackend
) -> ExtractArtifact:
    """Extract, reify and resolve per document, then merge across documents."""
    if not documents:
        raise ValueError("no documents to process")

    def process(doc: Document) -> tuple[ExtractionResult, list[dict[str, Any]]]:
        raw = extract_schema(doc, backend, cfg)
        merged = merge_candidates([raw])
        reified = reify_datatypes(merged)
        classes, properties, repairs = resolve_references(
            reified, RepairPolicy(cfg.repair_policy)
        )
        records = [_repair_record(doc.id, r) for r in repairs]
        return ExtractionResult(classes=classes, properties=properties), records

    with ThreadPoolExecutor(max_workers=cfg.max_concurrent_requests) as executor:
        outcomes = list(executor.map(process, documents))

    merged = merge_candidates([result for result, _ in outcomes])
    repairs = [record for _, records in outcomes for record in records]
    doc_meta = [
        {"id": d.id, "sector_tag": d.sector_tag, "source": str(d.source)} for d in documents
    ]
    return ExtractArtifact(
        documents=doc_meta, classes=merged.classes, properties=merged.properties, repairs=repairs
    )


def mint_elements(
    classes: Sequence[ClassCandidate],
    properties: Sequence[PropertyCandidate],
    base: Iri,
) -> tuple[list[OntologyClass], list[OntologyProperty]]:
    """Assign IRIs to candidates. Candidate order drives collision suffixes."""
    taken: set[Iri] = set()
    minted_classes: list[OntologyClass] = []
    iri_by_key: dict[str, Iri] = {}
    for c in classes:
        label = Label(c.label)
        iri = mint_class_iri(base, label, taken)
        taken.add(iri)
        key = normalize_label(c.label)
        iri_by_key.setdefault(key, iri)
        minted_classes.append(
            OntologyClass(
                iri=iri,
                label=label,
                description=c.description,
                is_reified_datatype=c.label in DATATYPE_CLASS_LABELS,
            )
        )

    minted_properties: list[OntologyProperty] = []
    for p in properties:
        domain = iri_by_key.get(normalize_label(p.domain))
        range_ = iri_by_key.get(normalize_label(p.range))
        if domain is None or range_ is None:
            raise ValueError(
                f"property {p.label!r} references an unresolved class; run resolve_references first"
            )
        label = Label(p.label)
        iri = mint_property_iri(base, label, taken)
        taken.add(iri)
        minted_properties.append(
            OntologyProperty(
                iri=iri, label=label, description=p.description, domain=domain, range=range_
            )
        )
    return minted_classes, minted_properties


def entail_stage(
    artifact: ExtractArtifact,
    cfg: PipelineConfig,
    backend: LlmBackend,
    llm_mode: str = "unknown",
) -> BuildResult:
    """Judge subsumption pairs, assemble the hierarchy, validate, serialize."""
    base = Iri(cfg.base_iri)
    classes, properties = mint_elements(artifact.classes, artifact.properties, base)

    queries = generate_candidate_pairs(classes, cfg.max_entailment_pairs)
    with ThreadPoolExecutor(max_workers=cfg.max_concurrent_requests) as executor:
        verdicts = list(
            executor.map(
                lambda q: judge_subsumption(q, backend, cfg.entailment_model), queries
            )
        )

    edges, conflicts = build_hierarchy(verdicts, classes)
    ontology = Ontology(base_iri=base, classes=classes, properties=properties, hierarchy=edges)
    violations = validate_ontology(ontology)
    for v in violations:
        logger.warning("validation: %s", v.message)

    turtle_text = emit_turtle(to_triples(ontology), base)
    manifest = {
        "base_iri": cfg.base_iri,
        "extraction_model": cfg.extraction_model,
        "entailment_model": cfg.entailment_model,
        "llm_mode": llm_mode,
        "prompt_sha256": {
            "extraction_system": load_prompt("extraction_system").sha256,
            "entailment_system": load_prompt("entailment_system").sha256,
        },
        "documents": [d["id"] for d in artifact.documents],
        "counts": {
            "classes": len(classes),
            "properties": len(properties),
            "edges": len(edges),
            "queries": len(queries),
            "conflicts": len(conflicts),
            "repairs": len(artifact.repairs),
        },
        "violations": [v.code.value for v in violations],
    }
    return BuildResult(
        ontology=ontology,
        turtle_text=turtle_text,
        violations=violations,
        conflicts=conflicts,
        repairs=artifact.repairs,
        verdicts=verdicts,
        manifest=manifest,
    )


def build(
    documents: Sequence[Document],
    cfg: PipelineConfig,
    backend: LlmBackend,
    llm_mode: str = "unknown",
) -> BuildResult:
    """Full pipeline over a loaded corpus."""
    artifact = extract_stage(documents, cfg, backend)
    return entail_stage(artifact, cfg, backend, llm_mode=llm_mode)


def sidecar_path(output: Path, suffix: str) -> Path:
    return output.with_name(output.stem + suffix)


def write_build_outputs(result: BuildResult, output: Path) -> dict[str, Path]:
    """Write the Turtle file plus repair log, conflict log and run manifest."""
    output.parent.mkdir(parents=True, exist_ok=True)
    output.write_text(result.turtle_text, encoding="utf-8", newline="\n")

    paths = {"turtle": output}

    repairs_path = sidecar_path(output, ".repairs.jsonl")
    with repairs_path.open("w", encoding="utf-8") as handle:
        for record in result.repairs:
            handle.write(json.dumps(record, sort_keys=True, ensure_ascii=True) + "\n")
    paths["repairs"] = repairs_path

    conflicts_path = sidecar_path(output, ".conflicts.jsonl")
    with conflicts_path.open("w", encoding="utf-8") as handle:
        for conflict in result.conflicts:
            record = {
                "kind": conflict.kind,
                "labels": list(conflict.labels),
                "dropped": [list(edge) for edge in conflict.dropped],
            }
            handle.write(json.dumps(record, sort_keys=True, ensure_ascii=True) + "\n")
    paths["conflicts"] = conflicts_path

    manifest_path = sidecar_path(output, ".manifest.json")
    manifest_path.write_text(
        json.dumps(result.manifest, indent=2, sort_keys=True, ensure_ascii=True) + "\n",
        encoding="utf-8",
    )
    paths["manifest"] = manifest_path
    return paths


def write_artifact(artifact: ExtractArtifact, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(
        json.dumps(artifact.to_json(), indent=2, sort_keys=True, ensure_ascii=True) + "\n",
        encoding="utf-8",
    )


def read_artifact(path: Path) -> ExtractArtifact:
    return ExtractArtifact.from_json(json.loads(path.read_text(encoding="utf-8")))
