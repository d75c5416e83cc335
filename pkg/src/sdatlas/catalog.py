"""Repository layer: document storage, hybrid keyword+vector search,
deterministic embeddings, SDG classification, and snapshot persistence.

Concurrency: single-writer / multi-reader. index_document and snapshot
operations take the writer lock; search and fetch read a consistent view
(documents are swapped in atomically, never observed half-indexed).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
import threading
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import expr
from .model import Diagnostic, SimSpec, SystemModel, Variable, ViewHint
from .structured import StructuredDiagram

__all__ = [
    "EMBED_DIM",
    "embed",
    "cosine",
    "SDG_TITLES",
    "classify_sdg",
    "SdgLabel",
    "SearchQuery",
    "SearchResult",
    "CatalogDocument",
    "Catalog",
    "InvalidDocument",
    "EmptyQuery",
    "BadLimit",
    "CorruptSnapshot",
    "VersionMismatch",
    "document_to_json",
    "document_from_json",
]

EMBED_DIM = 256
SNAPSHOT_VERSION = 1
BM25_K1 = 1.2
BM25_B = 0.75

_STOPWORDS = frozenset(
    """a an and are as at be by for from has have in is it its of on or that the
    this to was were will with within without their there then than which who
    whom when where how what why not no nor but if so such these those""".split()
)

_WORD_RE = re.compile(r"[a-z0-9]+")


class InvalidDocument(ValueError):
    pass


class EmptyQuery(ValueError):
    pass


class BadLimit(ValueError):
    pass


class CorruptSnapshot(ValueError):
    pass


class VersionMismatch(ValueError):
    pass


# ---------------------------------------------------------------------------
# deterministic embedding


def _tokenize(text: str) -> list[str]:
    return [t for t in _WORD_RE.findall(text.lower()) if t not in _STOPWORDS]


def _hash64(token: str) -> int:
    return int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "big")


def embed(text: str) -> np.ndarray:
    """Feature-hashed term-frequency embedding over word unigrams and
    bigrams; L2-normalized float64 vector; empty text yields zeros."""
    vec = np.zeros(EMBED_DIM, dtype=np.float64)
    tokens = _tokenize(text)
    features = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    for feature in features:
        h = _hash64(feature)
        sign = -1.0 if h >> 63 else 1.0
        vec[h % EMBED_DIM] += sign
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a.astype(np.float64), b.astype(np.float64)) / (na * nb))


# ---------------------------------------------------------------------------
# SDG classification (deterministic lexicon baseline)


def _load_lexicon_data() -> dict:
    with resources.files("sdatlas.data").joinpath("sdg_lexicon.json").open("r", encoding="utf-8") as f:
        return json.load(f)


_LEXICON_DATA = _load_lexicon_data()
SDG_TITLES: dict[int, str] = {int(k): v["title"] for k, v in _LEXICON_DATA.items()}
_DEFAULT_LEXICON: dict[int, list[str]] = {int(k): v["phrases"] for k, v in _LEXICON_DATA.items()}


@dataclass(frozen=True)
class SdgLabel:
    goal: int
    target: Optional[str] = None
    confidence: float = 1.0

    def __post_init__(self):
        if not 1 <= self.goal <= 17:
            raise ValueError(f"SDG goal out of range: {self.goal}")
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of range: {self.confidence}")
        if self.target is not None and self.target.split(".")[0] != str(self.goal):
            raise ValueError(f"target {self.target!r} does not belong to goal {self.goal}")


def classify_sdg(text: str, lexicon: Optional[dict[int, list[str]]] = None) -> list[SdgLabel]:
    """Match the per-goal phrase lexicon case-insensitively; confidence is
    the fraction of the goal's phrases found. Multi-label by construction."""
    lexicon = lexicon if lexicon is not None else _DEFAULT_LEXICON
    lowered = text.lower()
    labels = []
    for goal in sorted(lexicon):
        phrases = lexicon[goal]
        hits = sum(
            1 for p in phrases if re.search(rf"(?<![a-z0-9]){re.escape(p.lower())}(?![a-z0-9])", lowered)
        )
        if hits:
            labels.append(SdgLabel(goal=goal, confidence=hits / len(phrases)))
    return labels


# ---------------------------------------------------------------------------
# documents


@dataclass(frozen=True)
class CatalogDocument:
    id: str
    title: str
    abstract: str = ""
    authors: tuple[str, ...] = ()
    year: Optional[int] = None
    doi: Optional[str] = None
    model: Optional[SystemModel] = None
    diagram: Optional[StructuredDiagram] = None
    sdg_labels: tuple[SdgLabel, ...] = ()
    topics: tuple[str, ...] = ()
    has_cld: bool = False
    has_sfd: bool = False
    loop_count: int = 0

    def validate(self) -> None:
        if not self.id:
            raise InvalidDocument("document id is empty")
        if self.has_cld and self.diagram is None:
            raise InvalidDocument("has_cld set but no diagram present")
        if self.has_sfd and (self.model is None or not self.model.stocks()):
            raise InvalidDocument("has_sfd set but model missing or stock-free")
        expected = len(self.diagram.loops) if self.diagram is not None else 0
        if self.loop_count != expected:
            raise InvalidDocument(f"loop_count {self.loop_count} != stored diagram's {expected}")


@dataclass(frozen=True)
class SearchQuery:
    text: Optional[str] = None
    sdg: Optional[int] = None
    topic: Optional[str] = None
    require_diagram: bool = False
    limit: int = 20

    def validate(self) -> None:
        if self.text is None and self.sdg is None and self.topic is None:
            raise EmptyQuery("at least one of text/sdg/topic is required")
        if not 1 <= self.limit <= 100:
            raise BadLimit(f"limit must be in [1, 100], got {self.limit}")


@dataclass(frozen=True)
class SearchResult:
    id: str
    title: str
    score: float
    keyword_score: float
    vector_score: float
    matched_fields: tuple[str, ...]


class Catalog:
    def __init__(self):
        self._docs: dict[str, CatalogDocument] = {}
        self._vectors: dict[str, np.ndarray] = {}  # float32, quantized at index time
        self._doc_tokens: dict[str, Counter] = {}
        self._field_tokens: dict[str, dict[str, frozenset]] = {}
        self._writer_lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._docs)

    def ids(self) -> list[str]:
        return sorted(self._docs)

    def get(self, doc_id: str) -> Optional[CatalogDocument]:
        return self._docs.get(doc_id)

    def index_document(self, doc: CatalogDocument, vector: Optional[np.ndarray] = None) -> str:
        """Store and index a document; re-indexing the same id replaces it
        atomically. Returns the id."""
        doc.validate()
        fields = {
            "title": frozenset(_tokenize(doc.title)),
            "abstract": frozenset(_tokenize(doc.abstract)),
            "variables": frozenset(
                t
                for v in (doc.model.variables if doc.model else ())
                for t in _tokenize(v.display_name)
            ),
        }
        tokens = Counter(
            _tokenize(doc.title)
            + _tokenize(doc.abstract)
            + [t for v in (doc.model.variables if doc.model else ()) for t in _tokenize(v.display_name)]
        )
        if vector is None:
            vector = embed(f"{doc.title} {doc.abstract}").astype(np.float32)
        with self._writer_lock:
            self._docs[doc.id] = doc
            self._vectors[doc.id] = vector
            self._doc_tokens[doc.id] = tokens
            self._field_tokens[doc.id] = fields
        return doc.id

    # -- search ------------------------------------------------------------

    def _passes_filters(self, doc: CatalogDocument, q: SearchQuery) -> bool:
        if q.sdg is not None and not any(l.goal == q.sdg for l in doc.sdg_labels):
            return False
        if q.topic is not None and q.topic not in doc.topics:
            return False
        if q.require_diagram and not (doc.has_cld or doc.has_sfd):
            return False
        return True

    def _bm25(self, query_tokens: list[str], candidate_ids: list[str]) -> dict[str, float]:
        n = len(self._docs)
        if n == 0:
            return {doc_id: 0.0 for doc_id in candidate_ids}
        avgdl = sum(sum(c.values()) for c in self._doc_tokens.values()) / n
        df = {
            t: sum(1 for c in self._doc_tokens.values() if t in c) for t in set(query_tokens)
        }
        scores = {}
        for doc_id in candidate_ids:
            counts = self._doc_tokens[doc_id]
            dl = sum(counts.values())
            s = 0.0
            for t in query_tokens:
                tf = counts.get(t, 0)
                if tf == 0 or df[t] == 0:
                    continue
                idf = math.log((n - df[t] + 0.5) / (df[t] + 0.5) + 1.0)
                denom = tf + BM25_K1 * (1.0 - BM25_B + BM25_B * dl / avgdl) if avgdl > 0 else tf + BM25_K1
                s += idf * tf * (BM25_K1 + 1.0) / denom
            scores[doc_id] = s
        return scores

    def search(self, q: SearchQuery) -> list[SearchResult]:
        q.validate()
        candidates = [doc_id for doc_id in sorted(self._docs) if self._passes_filters(self._docs[doc_id], q)]

        query_tokens = _tokenize(q.text) if q.text else []
        if not query_tokens:
            # Text-less queries rank by recency (year desc, missing last) then id.
            ordered = sorted(
                candidates,
                key=lambda d: (-(self._docs[d].year if self._docs[d].year is not None else -(10**9)), d),
            )
            return [
                SearchResult(d, self._docs[d].title, 0.0, 0.0, 0.0, ()) for d in ordered[: q.limit]
            ]

        keyword = self._bm25(query_tokens, candidates)
        max_kw = max(keyword.values(), default=0.0)
        qvec = embed(q.text or "")
        results = []
        for doc_id in candidates:
            doc = self._docs[doc_id]
            vs = cosine(qvec, self._vectors[doc_id])
            kw_norm = keyword[doc_id] / max_kw if max_kw > 0 else 0.0
            score = 0.5 * kw_norm + 0.5 * max(vs, 0.0)
            matched = tuple(
                f
                for f in ("title", "abstract", "variables")
                if any(t in self._field_tokens[doc_id][f] for t in query_tokens)
            )
            results.append(
                SearchResult(doc_id, doc.title, score, keyword[doc_id], vs, matched)
            )
        results.sort(key=lambda r: (-r.score, r.id))
        return results[: q.limit]

    # -- snapshots ----------------------------------------------------------

    def save_snapshot(self, path: str | Path) -> None:
        path = Path(path)
        with self._writer_lock:
            path.mkdir(parents=True, exist_ok=True)
            ids = sorted(self._docs)
            docs_bytes = (
                "".join(json.dumps(document_to_json(self._docs[d]), ensure_ascii=False) + "\n" for d in ids)
            ).encode("utf-8")
            docids_bytes = ("".join(d + "\n" for d in ids)).encode("utf-8")
            if ids:
                vec_bytes = np.concatenate([self._vectors[d] for d in ids]).astype("<f4").tobytes()
            else:
                vec_bytes = b""
            files = {
                "documents.jsonl": docs_bytes,
                "docids.txt": docids_bytes,
                "vectors.bin": vec_bytes,
            }
            for name, data in files.items():
                (path / name).write_bytes(data)
            manifest = {
                "format_version": SNAPSHOT_VERSION,
                "document_count": len(ids),
                "embedding_dim": EMBED_DIM,
                "checksums": {name: hashlib.sha256(data).hexdigest() for name, data in files.items()},
            }
            (path / "manifest.json").write_bytes(
                (json.dumps(manifest, ensure_ascii=False, indent=2) + "\n").encode("utf-8")
            )

    @classmethod
    def load_snapshot(cls, path: str | Path) -> "Catalog":
        path = Path(path)
        manifest_path = path / "manifest.json"
        if not manifest_path.is_file():
            raise CorruptSnapshot(f"missing manifest: {manifest_path}")
        try:
            manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise CorruptSnapshot(f"unreadable manifest: {e}") from None
        if manifest.get("format_version") != SNAPSHOT_VERSION:
            raise VersionMismatch(
                f"snapshot format {manifest.get('format_version')!r}, expected {SNAPSHOT_VERSION}"
            )
        data = {}
        for name, checksum in manifest.get("checksums", {}).items():
            file_path = path / name
            if not file_path.is_file():
                raise CorruptSnapshot(f"missing snapshot file: {name}")
            blob = file_path.read_bytes()
            if hashlib.sha256(blob).hexdigest() != checksum:
                raise CorruptSnapshot(f"checksum mismatch for {name}")
            data[name] = blob
        for required in ("documents.jsonl", "docids.txt", "vectors.bin"):
            if required not in data:
                raise CorruptSnapshot(f"manifest lists no {required}")

        ids = data["docids.txt"].decode("utf-8").splitlines()
        if len(data["vectors.bin"]) != len(ids) * EMBED_DIM * 4:
            raise CorruptSnapshot("vectors.bin size does not match document count")
        vectors = np.frombuffer(data["vectors.bin"], dtype="<f4").reshape(len(ids), EMBED_DIM)

        catalog = cls()
        lines = data["documents.jsonl"].decode("utf-8").splitlines()
        if len(lines) != len(ids):
            raise CorruptSnapshot("documents.jsonl does not match docids.txt")
        for i, line in enumerate(lines):
            doc = document_from_json(json.loads(line))
            if doc.id != ids[i]:
                raise CorruptSnapshot(f"document order mismatch at row {i}")
            catalog.index_document(doc, vector=vectors[i].astype(np.float32))
        return catalog


# ---------------------------------------------------------------------------
# JSON codec for documents and models


def _ast_to_text(ast) -> Optional[str]:
    return None if ast is None else expr.render_equation(ast)


def _model_to_json(model: SystemModel) -> dict:
    return {
        "name": model.name,
        "variables": [
            {
                "name": v.name,
                "display_name": v.display_name,
                "kind": v.kind,
                "equation": _ast_to_text(v.equation),
                "opaque_equation": v.opaque_equation,
                "initial": _ast_to_text(v.initial),
                "inflows": list(v.inflows),
                "outflows": list(v.outflows),
                "units": v.units,
                "documentation": v.documentation,
            }
            for v in model.variables
        ],
        "sim_spec": (
            {"start": model.sim_spec.start, "stop": model.sim_spec.stop, "dt": model.sim_spec.dt}
            if model.sim_spec
            else None
        ),
        "views": [{"variable": h.variable, "x": h.x, "y": h.y} for h in model.views],
        "diagnostics": [
            {"severity": d.severity, "code": d.code, "message": d.message, "location": d.location}
            for d in model.diagnostics
        ],
    }


def _model_from_json(data: dict) -> SystemModel:
    return SystemModel(
        name=data["name"],
        variables=tuple(
            Variable(
                name=v["name"],
                display_name=v["display_name"],
                kind=v["kind"],
                equation=expr.parse_equation(v["equation"]) if v.get("equation") else None,
                opaque_equation=v.get("opaque_equation"),
                initial=expr.parse_equation(v["initial"]) if v.get("initial") else None,
                inflows=tuple(v.get("inflows", [])),
                outflows=tuple(v.get("outflows", [])),
                units=v.get("units"),
                documentation=v.get("documentation"),
            )
            for v in data["variables"]
        ),
        sim_spec=SimSpec(**data["sim_spec"]) if data.get("sim_spec") else None,
        views=tuple(ViewHint(**h) for h in data.get("views", [])),
        diagnostics=tuple(Diagnostic(**d) for d in data.get("diagnostics", [])),
    )


def document_to_json(doc: CatalogDocument) -> dict:
    return {
        "id": doc.id,
        "title": doc.title,
        "abstract": doc.abstract,
        "authors": list(doc.authors),
        "year": doc.year,
        "doi": doc.doi,
        "model": _model_to_json(doc.model) if doc.model else None,
        "diagram": doc.diagram.to_json_dict() if doc.diagram else None,
        "sdg_labels": [
            {"goal": l.goal, "target": l.target, "confidence": l.confidence} for l in doc.sdg_labels
        ],
        "topics": list(doc.topics),
        "has_cld": doc.has_cld,
        "has_sfd": doc.has_sfd,
        "loop_count": doc.loop_count,
    }


def document_from_json(data: dict) -> CatalogDocument:
    return CatalogDocument(
        id=data["id"],
        title=data["title"],
        abstract=data.get("abstract", ""),
        authors=tuple(data.get("authors", [])),
        year=data.get("year"),
        doi=data.get("doi"),
        model=_model_from_json(data["model"]) if data.get("model") else None,
        diagram=StructuredDiagram.from_json_dict(data["diagram"]) if data.get("diagram") else None,
        sdg_labels=tuple(SdgLabel(**l) for l in data.get("sdg_labels", [])),
        topics=tuple(data.get("topics", [])),
        has_cld=data.get("has_cld", False),
        has_sfd=data.get("has_sfd", False),
        loop_count=data.get("loop_count", 0),
    )
