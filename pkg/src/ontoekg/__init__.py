"""ontoekg: LLM-driven ontology construction for enterprise knowledge graphs.

A two-stage chat pipeline (element extraction, then pairwise subsumption
entailment) that turns unstructured enterprise text into a validated OWL
T-Box serialized as deterministic Turtle, plus an evaluation harness that
scores predicted ontologies against gold ontologies with exact and
embedding-fuzzy triple matching.
"""

from .config import PipelineConfig, load_config
from .entailment import (
    Conflict,
    SubsumptionQuery,
    SubsumptionVerdict,
    build_hierarchy,
    generate_candidate_pairs,
    judge_subsumption,
)
from .evaluation import (
    EvalTriple,
    MatchReport,
    exact_match_score,
    fuzzy_match_score,
    render_report,
    to_eval_triples,
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
from .ingest import Document, load_corpus, window
from .model import (
    Iri,
    Label,
    Ontology,
    OntologyClass,
    OntologyProperty,
    SubclassEdge,
    ValidationFailure,
    Violation,
    ViolationCode,
    mint_class_iri,
    mint_property_iri,
    validate_ontology,
)
from .pipeline import BuildResult, build, entail_stage, extract_stage
from .turtle import (
    Term,
    Triple,
    TurtleSyntaxError,
    UnresolvedReferenceError,
    canonicalize,
    emit_turtle,
    parse_turtle,
    to_triples,
)

__version__ = "0.1.0"

__all__ = [
    "BuildResult",
    "ClassCandidate",
    "Conflict",
    "Document",
    "EvalTriple",
    "ExtractionResult",
    "Iri",
    "Label",
    "MatchReport",
    "Ontology",
    "OntologyClass",
    "OntologyProperty",
    "PipelineConfig",
    "PropertyCandidate",
    "Repair",
    "RepairPolicy",
    "SubclassEdge",
    "SubsumptionQuery",
    "SubsumptionVerdict",
    "Term",
    "Triple",
    "TurtleSyntaxError",
    "UnresolvedReferenceError",
    "ValidationFailure",
    "Violation",
    "ViolationCode",
    "build",
    "build_hierarchy",
    "canonicalize",
    "emit_turtle",
    "entail_stage",
    "exact_match_score",
    "extract_schema",
    "extract_stage",
    "fuzzy_match_score",
    "generate_candidate_pairs",
    "judge_subsumption",
    "load_config",
    "load_corpus",
    "merge_candidates",
    "mint_class_iri",
    "mint_property_iri",
    "parse_turtle",
    "reify_datatypes",
    "render_report",
    "resolve_references",
    "to_eval_triples",
    "to_triples",
    "validate_ontology",
    "window",
]
