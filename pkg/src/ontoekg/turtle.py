"""Triple generation and Turtle I/O.

Output is byte-deterministic: fixed prefix block, subjects in sorted order,
predicates sorted within each subject. The parser covers exactly the subset
this module emits plus a little tolerance (the `a` keyword, comments, object
lists, language tags, unknown annotation predicates). It is not a general
Turtle parser.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from .model import (
    DEFAULT_BASE_IRI,
    Iri,
    Label,
    Ontology,
    OntologyClass,
    OntologyProperty,
    SubclassEdge,
    ValidationFailure,
    fatal_violations,
    local_name,
    validate_ontology,
)

logger = logging.getLogger(__name__)

RDF_NS = "http://www.w3.org/1999/02/22-rdf-syntax-ns#"
RDFS_NS = "http://www.w3.org/2000/01/rdf-schema#"
OWL_NS = "http://www.w3.org/2002/07/owl#"

RDF_TYPE = Iri(RDF_NS + "type")
RDFS_LABEL = Iri(RDFS_NS + "label")
RDFS_COMMENT = Iri(RDFS_NS + "comment")
RDFS_SUBCLASSOF = Iri(RDFS_NS + "subClassOf")
RDFS_DOMAIN = Iri(RDFS_NS + "domain")
RDFS_RANGE = Iri(RDFS_NS + "range")
OWL_CLASS = Iri(OWL_NS + "Class")
OWL_OBJECT_PROPERTY = Iri(OWL_NS + "ObjectProperty")

#: Labels of classes produced by datatype reification.
DATATYPE_CLASS_LABELS = frozenset(
    {"Text", "Number", "Float", "Boolean", "Date", "DateTime", "URL"}
)

_SAFE_LOCAL_RE = re.compile(r"^[A-Za-z0-9_][A-Za-z0-9_\-]*$")


@dataclass(frozen=True)
class Term:
    """Object position of a triple: an IRI or a literal with optional datatype."""

    iri: Iri | None = None
    literal: str | None = None
    datatype: Iri | None = None

    def __post_init__(self) -> None:
        if (self.iri is None) == (self.literal is None):
            raise ValueError("term must be exactly one of IRI or literal")
        if self.datatype is not None and self.literal is None:
            raise ValueError("datatype only applies to literals")

    def sort_key(self) -> tuple:
        if self.iri is not None:
            return (0, self.iri.value, "")
        return (1, self.literal, self.datatype.value if self.datatype else "")


@dataclass(frozen=True)
class Triple:
    subject: Iri
    predicate: Iri
    object: Term

    def sort_key(self) -> tuple:
        return (self.subject.value, self.predicate.value, self.object.sort_key())


def iri_term(iri: Iri) -> Term:
    return Term(iri=iri)


def literal_term(text: str, datatype: Iri | None = None) -> Term:
    return Term(literal=text, datatype=datatype)


def to_triples(ontology: Ontology, strict: bool = False) -> list[Triple]:
    """Map the ontology onto RDF triples, sorted by (subject, predicate, object).

    With strict=True, CYCLE or DANGLING_REF violations raise ValidationFailure.
    """
    if strict:
        fatal = fatal_violations(validate_ontology(ontology))
        if fatal:
            raise ValidationFailure(fatal)

    triples: list[Triple] = []
    for c in ontology.classes:
        triples.append(Triple(c.iri, RDF_TYPE, iri_term(OWL_CLASS)))
        triples.append(Triple(c.iri, RDFS_LABEL, literal_term(c.label.text)))
        if c.description:
            triples.append(Triple(c.iri, RDFS_COMMENT, literal_term(c.description)))
    for e in ontology.hierarchy:
        triples.append(Triple(e.sub, RDFS_SUBCLASSOF, iri_term(e.sup)))
    for p in ontology.properties:
        triples.append(Triple(p.iri, RDF_TYPE, iri_term(OWL_OBJECT_PROPERTY)))
        triples.append(Triple(p.iri, RDFS_LABEL, literal_term(p.label.text)))
        triples.append(Triple(p.iri, RDFS_DOMAIN, iri_term(p.domain)))
        triples.append(Triple(p.iri, RDFS_RANGE, iri_term(p.range)))
        if p.description:
            triples.append(Triple(p.iri, RDFS_COMMENT, literal_term(p.description)))
    return sorted(set(triples), key=Triple.sort_key)


_ESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\r": "\\r", "\t": "\\t"}


def _escape_literal(text: str) -> str:
    return "".join(_ESCAPES.get(ch, ch) for ch in text)


def _render_iri(iri: Iri, prefixes: list[tuple[str, str]]) -> str:
    for name, namespace in prefixes:
        if iri.value.startswith(namespace):
            rest = iri.value[len(namespace):]
            if _SAFE_LOCAL_RE.match(rest):
                return f"{name}:{rest}"
    return f"<{iri.value}>"


def _render_term(term: Term, prefixes: list[tuple[str, str]]) -> str:
    if term.iri is not None:
        return _render_iri(term.iri, prefixes)
    rendered = f'"{_escape_literal(term.literal or "")}"'
    if term.datatype is not None:
        rendered += "^^" + _render_iri(term.datatype, prefixes)
    return rendered


def emit_turtle(triples: list[Triple], base: Iri) -> str:
    """Serialize to Turtle text. Equal input yields byte-identical output."""
    prefixes = [("rdf", RDF_NS), ("rdfs", RDFS_NS), ("owl", OWL_NS), ("", base.value)]
    lines = [f"@prefix {name}: <{ns}> ." for name, ns in prefixes]
    ordered = sorted(set(triples), key=Triple.sort_key)

    def flush(block: list[str]) -> None:
        if block:
            block[-1] = block[-1][:-2] + " ."
            lines.append("")
            lines.extend(block)

    current: Iri | None = None
    block: list[str] = []
    for t in ordered:
        po = f"{_render_iri(t.predicate, prefixes)} {_render_term(t.object, prefixes)}"
        if t.subject != current:
            flush(block)
            block = [f"{_render_iri(t.subject, prefixes)} {po} ;"]
            current = t.subject
        else:
            block.append(f"    {po} ;")
    flush(block)
    return "\n".join(lines) + "\n"


class TurtleSyntaxError(Exception):
    """Parse failure with 1-based position information."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class UnresolvedReferenceError(Exception):
    """A domain/range or edge endpoint does not resolve to a declared class."""


_UNESCAPES = {"\\": "\\", '"': '"', "n": "\n", "r": "\r", "t": "\t"}


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.text) and self.text[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def error(self, message: str, line: int | None = None, col: int | None = None):
        raise TurtleSyntaxError(message, line or self.line, col or self.col)

    def _skip_space(self) -> None:
        while self.pos < len(self.text):
            ch = self.text[self.pos]
            if ch in " \t\r\n":
                self._advance()
            elif ch == "#":
                while self.pos < len(self.text) and self.text[self.pos] != "\n":
                    self._advance()
            else:
                return

    def tokens(self):
        """Yield (kind, value, line, col) tuples, ending with EOF."""
        pname = re.compile(r"[A-Za-z0-9_\-]*")
        while True:
            self._skip_space()
            line, col = self.line, self.col
            if self.pos >= len(self.text):
                yield ("EOF", "", line, col)
                return
            ch = self.text[self.pos]
            if ch == "<":
                end = self.text.find(">", self.pos + 1)
                newline = self.text.find("\n", self.pos + 1)
                if end == -1 or (newline != -1 and newline < end):
                    self.error("unterminated IRI", line, col)
                value = self.text[self.pos + 1 : end]
                self._advance(end - self.pos + 1)
                yield ("IRIREF", value, line, col)
            elif ch == '"':
                self._advance()
                out: list[str] = []
                while True:
                    if self.pos >= len(self.text):
                        self.error("unterminated string literal", line, col)
                    c = self.text[self.pos]
                    if c == "\n":
                        self.error("unterminated string literal", line, col)
                    if c == "\\":
                        if self.pos + 1 >= len(self.text):
                            self.error("dangling escape", self.line, self.col)
                        esc = self.text[self.pos + 1]
                        if esc in _UNESCAPES:
                            out.append(_UNESCAPES[esc])
                            self._advance(2)
                        elif esc in "uU":
                            width = 4 if esc == "u" else 8
                            hexs = self.text[self.pos + 2 : self.pos + 2 + width]
                            if len(hexs) < width or not all(h in "0123456789abcdefABCDEF" for h in hexs):
                                self.error("bad unicode escape", self.line, self.col)
                            out.append(chr(int(hexs, 16)))
                            self._advance(2 + width)
                        else:
                            self.error(f"unknown escape \\{esc}", self.line, self.col)
                    elif c == '"':
                        self._advance()
                        break
                    else:
                        out.append(c)
                        self._advance()
                yield ("STRING", "".join(out), line, col)
            elif ch == "@":
                self._advance()
                m = re.match(r"[A-Za-z][A-Za-z\-]*", self.text[self.pos :])
                if not m:
                    self.error("bare '@'", line, col)
                word = m.group(0)
                self._advance(len(word))
                if word == "prefix":
                    yield ("PREFIX", "", line, col)
                else:
                    yield ("LANGTAG", word, line, col)
            elif self.text.startswith("^^", self.pos):
                self._advance(2)
                yield ("DTYPE", "", line, col)
            elif ch == ".":
                self._advance()
                yield ("DOT", "", line, col)
            elif ch == ";":
                self._advance()
                yield ("SEMI", "", line, col)
            elif ch == ",":
                self._advance()
                yield ("COMMA", "", line, col)
            else:
                m = pname.match(self.text, self.pos)
                head = m.group(0) if m else ""
                after = self.pos + len(head)
                if after < len(self.text) and self.text[after] == ":":
                    local_match = pname.match(self.text, after + 1)
                    local = local_match.group(0) if local_match else ""
                    self._advance(len(head) + 1 + len(local))
                    yield ("PNAME", (head, local), line, col)
                elif head == "a":
                    self._advance(1)
                    yield ("A", "", line, col)
                else:
                    self.error(f"unexpected character {ch!r}", line, col)


class _Parser:
    def __init__(self, text: str):
        self._lexer = _Lexer(text)
        self._stream = self._lexer.tokens()
        self._lookahead = next(self._stream)
        self.prefixes: dict[str, str] = {}
        self.triples: list[Triple] = []

    def _next(self):
        token = self._lookahead
        self._lookahead = next(self._stream)
        return token

    def _expect(self, kind: str):
        token = self._next()
        if token[0] != kind:
            raise TurtleSyntaxError(
                f"expected {kind}, found {token[0] or 'EOF'}", token[2], token[3]
            )
        return token

    def _resolve(self, token) -> Iri:
        kind, value, line, col = token
        if kind == "IRIREF":
            try:
                return Iri(value)
            except ValueError as exc:
                raise TurtleSyntaxError(str(exc), line, col) from exc
        prefix, local = value
        if prefix not in self.prefixes:
            raise TurtleSyntaxError(f"unknown prefix {prefix!r}:", line, col)
        return Iri(self.prefixes[prefix] + local)

    def parse(self) -> None:
        while True:
            token = self._lookahead
            if token[0] == "EOF":
                return
            if token[0] == "PREFIX":
                self._next()
                name_token = self._expect("PNAME")
                prefix, local = name_token[1]
                if local:
                    raise TurtleSyntaxError(
                        "prefix declaration must end with ':'", name_token[2], name_token[3]
                    )
                iri_token = self._expect("IRIREF")
                self.prefixes[prefix] = iri_token[1]
                self._expect("DOT")
                continue
            self._triples_block()

    def _triples_block(self) -> None:
        subject_token = self._next()
        if subject_token[0] not in ("IRIREF", "PNAME"):
            raise TurtleSyntaxError(
                f"expected subject, found {subject_token[0] or 'EOF'}",
                subject_token[2],
                subject_token[3],
            )
        subject = self._resolve(subject_token)
        while True:
            self._predicate_object(subject)
            token = self._next()
            if token[0] == "DOT":
                return
            if token[0] == "SEMI":
                if self._lookahead[0] == "DOT":
                    self._next()
                    return
                continue
            raise TurtleSyntaxError(
                f"expected ';' or '.', found {token[0] or 'EOF'}", token[2], token[3]
            )

    def _predicate_object(self, subject: Iri) -> None:
        token = self._next()
        if token[0] == "A":
            predicate = RDF_TYPE
        elif token[0] in ("IRIREF", "PNAME"):
            predicate = self._resolve(token)
        else:
            raise TurtleSyntaxError(
                f"expected predicate, found {token[0] or 'EOF'}", token[2], token[3]
            )
        while True:
            self.triples.append(Triple(subject, predicate, self._object()))
            if self._lookahead[0] == "COMMA":
                self._next()
                continue
            return

    def _object(self) -> Term:
        token = self._next()
        if token[0] in ("IRIREF", "PNAME"):
            return iri_term(self._resolve(token))
        if token[0] == "STRING":
            datatype = None
            if self._lookahead[0] == "DTYPE":
                self._next()
                datatype = self._resolve(self._next())
            elif self._lookahead[0] == "LANGTAG":
                self._next()  # language tags are accepted and dropped
            return literal_term(token[1], datatype)
        raise TurtleSyntaxError(
            f"expected object, found {token[0] or 'EOF'}", token[2], token[3]
        )


def _guess_base(prefixes: dict[str, str], subjects: list[Iri]) -> Iri:
    if "" in prefixes:
        return Iri(prefixes[""])
    for subject in subjects:
        value = subject.value
        if "#" in value:
            return Iri(value.rsplit("#", 1)[0] + "#")
        if "/" in value[value.find("://") + 3 :]:
            return Iri(value.rsplit("/", 1)[0] + "/")
    return Iri(DEFAULT_BASE_IRI)


def _safe_label(text: str, fallback: str) -> Label:
    try:
        return Label(text)
    except ValueError:
        return Label(fallback)


def parse_turtle(text: str, strict: bool = False) -> tuple[Ontology, list[Triple]]:
    """Parse Turtle into an Ontology plus the raw triple list.

    Unknown annotation predicates are kept in the raw list and ignored in the
    Ontology. Undeclared domain/range/edge endpoints raise
    UnresolvedReferenceError in strict mode; otherwise they are patched with
    placeholder classes and logged. Object properties missing a domain or
    range triple are skipped with a warning (strict: error).
    """
    parser = _Parser(text)
    parser.parse()
    raw = parser.triples

    types: dict[Iri, set[Iri]] = {}
    labels: dict[Iri, str] = {}
    comments: dict[Iri, str] = {}
    domains: dict[Iri, Iri] = {}
    ranges: dict[Iri, Iri] = {}
    edges: list[tuple[Iri, Iri]] = []
    for t in raw:
        obj = t.object
        if t.predicate == RDF_TYPE and obj.iri is not None:
            types.setdefault(t.subject, set()).add(obj.iri)
        elif t.predicate == RDFS_LABEL and obj.literal is not None:
            labels.setdefault(t.subject, obj.literal)
        elif t.predicate == RDFS_COMMENT and obj.literal is not None:
            comments.setdefault(t.subject, obj.literal)
        elif t.predicate == RDFS_DOMAIN and obj.iri is not None:
            domains.setdefault(t.subject, obj.iri)
        elif t.predicate == RDFS_RANGE and obj.iri is not None:
            ranges.setdefault(t.subject, obj.iri)
        elif t.predicate == RDFS_SUBCLASSOF and obj.iri is not None:
            edges.append((t.subject, obj.iri))

    class_iris = sorted(i for i, ts in types.items() if OWL_CLASS in ts)
    property_iris = sorted(i for i, ts in types.items() if OWL_OBJECT_PROPERTY in ts)

    classes: dict[Iri, OntologyClass] = {}
    for iri in class_iris:
        label = _safe_label(labels.get(iri, local_name(iri)), local_name(iri))
        classes[iri] = OntologyClass(
            iri=iri,
            label=label,
            description=comments.get(iri, ""),
            is_reified_datatype=label.text in DATATYPE_CLASS_LABELS,
        )

    def ensure_class(iri: Iri, context: str) -> None:
        if iri in classes:
            return
        if strict:
            raise UnresolvedReferenceError(
                f"{context} refers to undeclared class: {iri.value}"
            )
        logger.warning("%s refers to undeclared class %s; adding placeholder", context, iri.value)
        classes[iri] = OntologyClass(iri=iri, label=_safe_label(local_name(iri), "Unnamed"))

    properties: list[OntologyProperty] = []
    for iri in property_iris:
        domain = domains.get(iri)
        range_ = ranges.get(iri)
        if domain is None or range_ is None:
            message = f"object property {iri.value} lacks a domain or range; skipped"
            if strict:
                raise UnresolvedReferenceError(message)
            logger.warning(message)
            continue
        ensure_class(domain, f"property {iri.value} domain")
        ensure_class(range_, f"property {iri.value} range")
        properties.append(
            OntologyProperty(
                iri=iri,
                label=_safe_label(labels.get(iri, local_name(iri)), local_name(iri)),
                description=comments.get(iri, ""),
                domain=domain,
                range=range_,
            )
        )

    hierarchy: set[SubclassEdge] = set()
    for sub, sup in edges:
        if sub == sup:
            logger.warning("ignoring self subclass edge on %s", sub.value)
            continue
        ensure_class(sub, "subclass edge")
        ensure_class(sup, "subclass edge")
        hierarchy.add(SubclassEdge(sub, sup))

    ontology = Ontology(
        base_iri=_guess_base(parser.prefixes, class_iris or sorted(types)),
        classes=[classes[i] for i in sorted(classes)],
        properties=properties,
        hierarchy=hierarchy,
    )
    return ontology, raw


def _nt_term(term: Term) -> str:
    if term.iri is not None:
        return f"<{term.iri.value}>"
    rendered = f'"{_escape_literal(term.literal or "")}"'
    if term.datatype is not None:
        rendered += f"^^<{term.datatype.value}>"
    return rendered


def canonicalize(ontology: Ontology) -> tuple[str, ...]:
    """Total-order-sorted triple rendering, suitable for equality comparison."""
    return tuple(
        f"<{t.subject.value}> <{t.predicate.value}> {_nt_term(t.object)} ."
        for t in to_triples(ontology)
    )
