"""Datasets, label schema, and span <-> BIO tag conversion.

A dataset is UTF-8 JSONL, one sentence per line:

    {"id": str, "words": [str], "spans": [{"label": str, "start": int, "end": int}],
     "domain": str (optional)}

Span indices are word indices, end-exclusive. Entities must be flat:
pairwise disjoint, inside the sentence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence

from .errors import DataError

# Entity types of the optimization-word-problem corpus this toolkit targets.
DEFAULT_LABELS = ("LIMIT", "CONST_DIR", "VAR", "PARAM", "OBJ_NAME", "OBJ_DIR")

OUTSIDE = "O"


class LabelSet:
    """Ordered set of entity-type names and the BIO tag vocabulary it induces.

    Tag ids are stable: O is 0, then (B-y, I-y) pairs in label order, so a
    label set with k types has exactly 2k+1 tags.
    """

    def __init__(self, labels: Sequence[str] = DEFAULT_LABELS):
        labels = tuple(labels)
        if not labels:
            raise DataError("label set must be nonempty")
        if len(set(labels)) != len(labels):
            raise DataError(f"duplicate label names: {labels}")
        if any(not lab for lab in labels):
            raise DataError("empty label name")
        self.labels = labels
        self._label_index = {lab: j for j, lab in enumerate(labels)}
        self.tag_names = [OUTSIDE]
        for lab in labels:
            self.tag_names.append(f"B-{lab}")
            self.tag_names.append(f"I-{lab}")
        self._tag_index = {name: i for i, name in enumerate(self.tag_names)}

    @property
    def n_tags(self) -> int:
        return len(self.tag_names)

    def __contains__(self, label: str) -> bool:
        return label in self._label_index

    def __eq__(self, other) -> bool:
        return isinstance(other, LabelSet) and self.labels == other.labels

    def __repr__(self) -> str:
        return f"LabelSet({list(self.labels)!r})"

    def begin_id(self, label: str) -> int:
        return 1 + 2 * self._index(label)

    def inside_id(self, label: str) -> int:
        return 2 + 2 * self._index(label)

    def tag_id(self, tag_name: str) -> int:
        try:
            return self._tag_index[tag_name]
        except KeyError:
            raise DataError(f"unknown tag {tag_name!r}") from None

    def tag_name(self, tag: int) -> str:
        self._check_tag(tag)
        return self.tag_names[tag]

    def label_of(self, tag: int) -> str | None:
        """Entity type of a B-/I- tag, None for O."""
        self._check_tag(tag)
        if tag == 0:
            return None
        return self.labels[(tag - 1) // 2]

    def is_begin(self, tag: int) -> bool:
        self._check_tag(tag)
        return tag != 0 and (tag - 1) % 2 == 0

    def is_inside(self, tag: int) -> bool:
        self._check_tag(tag)
        return tag != 0 and (tag - 1) % 2 == 1

    def _index(self, label: str) -> int:
        try:
            return self._label_index[label]
        except KeyError:
            raise DataError(f"unknown label {label!r}") from None

    def _check_tag(self, tag: int) -> None:
        if not 0 <= tag < len(self.tag_names):
            raise DataError(f"tag id {tag} out of range [0, {len(self.tag_names)})")


@dataclass(frozen=True)
class EntitySpan:
    """One entity: [start, end) word indices with an entity-type name."""

    label: str
    start: int = 0
    end: int = 0

    def __post_init__(self):
        if not 0 <= self.start < self.end:
            raise DataError(f"bad span bounds [{self.start}, {self.end})")


@dataclass
class Sentence:
    """Pre-tokenized input text with (possibly empty) gold entity spans."""

    id: str
    words: list[str]
    spans: list[EntitySpan] = field(default_factory=list)
    domain: str | None = None

    def __post_init__(self):
        if not self.words:
            raise DataError(f"sentence {self.id!r}: empty word list")
        if any(w == "" for w in self.words):
            raise DataError(f"sentence {self.id!r}: empty word string")
        check_flat(self.spans, len(self.words), where=f"sentence {self.id!r}")

    def __len__(self) -> int:
        return len(self.words)


def check_flat(spans: Iterable[EntitySpan], n: int, where: str = "") -> None:
    """Reject spans that leave [0, n) or overlap each other."""
    prefix = f"{where}: " if where else ""
    ordered = sorted(spans, key=lambda s: (s.start, s.end))
    for s in ordered:
        if s.end > n:
            raise DataError(f"{prefix}span [{s.start}, {s.end}) exceeds length {n}")
    for a, b in zip(ordered, ordered[1:]):
        if b.start < a.end:
            raise DataError(
                f"{prefix}overlapping spans [{a.start}, {a.end}) and [{b.start}, {b.end})"
            )


def spans_to_bio(spans: Iterable[EntitySpan], n: int, label_set: LabelSet) -> list[int]:
    """Encode disjoint spans over n words as a BIO tag-id sequence."""
    spans = list(spans)
    check_flat(spans, n)
    tags = [0] * n
    for s in spans:
        tags[s.start] = label_set.begin_id(s.label)
        inside = label_set.inside_id(s.label)
        for i in range(s.start + 1, s.end):
            tags[i] = inside
    return tags


def bio_to_spans(
    tags: Sequence[int], label_set: LabelSet, strict: bool = False
) -> list[EntitySpan]:
    """Decode a BIO tag-id sequence into entity spans, sorted by start.

    A dangling I-y (not preceded by B-y or I-y) starts a new span of type y;
    with strict=True it raises instead. Decoded model output may be invalid
    BIO, so the repairing default keeps evaluation alive.
    """
    spans: list[EntitySpan] = []
    cur_label: str | None = None
    cur_start = 0
    for i, tag in enumerate(tags):
        label = label_set.label_of(tag)
        if label is None:  # O
            if cur_label is not None:
                spans.append(EntitySpan(cur_label, cur_start, i))
                cur_label = None
        elif label_set.is_begin(tag):
            if cur_label is not None:
                spans.append(EntitySpan(cur_label, cur_start, i))
            cur_label, cur_start = label, i
        else:  # I-y
            if cur_label == label:
                continue
            if strict:
                raise DataError(
                    f"position {i}: dangling {label_set.tag_name(tag)} "
                    f"after {label_set.tag_name(tags[i - 1]) if i else 'start'}"
                )
            # repair: treat as B-y
            if cur_label is not None:
                spans.append(EntitySpan(cur_label, cur_start, i))
            cur_label, cur_start = label, i
    if cur_label is not None:
        spans.append(EntitySpan(cur_label, cur_start, len(tags)))
    return spans


def validate_bio(tags: Sequence[int], label_set: LabelSet) -> bool:
    """True iff every I-y is preceded by B-y or I-y."""
    prev = 0
    for tag in tags:
        if label_set.is_inside(tag):
            label = label_set.label_of(tag)
            if label_set.label_of(prev) != label or prev == 0:
                return False
        prev = tag
    return True


def _sentence_from_record(rec: dict, label_set: LabelSet, lineno: int) -> Sentence:
    where = f"line {lineno}"
    if not isinstance(rec, dict):
        raise DataError(f"{where}: record is not a JSON object")
    for key in ("id", "words"):
        if key not in rec:
            raise DataError(f"{where}: missing field {key!r}")
    words = rec["words"]
    if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
        raise DataError(f"{where}: 'words' must be a list of strings")
    spans = []
    for sp in rec.get("spans", []):
        try:
            label, start, end = sp["label"], sp["start"], sp["end"]
        except (TypeError, KeyError):
            raise DataError(f"{where}: malformed span {sp!r}") from None
        if label not in label_set:
            raise DataError(f"{where}: unknown label {label!r}")
        if not isinstance(start, int) or not isinstance(end, int):
            raise DataError(f"{where}: span indices must be integers, got {sp!r}")
        try:
            spans.append(EntitySpan(label, start, end))
        except DataError as e:
            raise DataError(f"{where}: {e}") from None
    domain = rec.get("domain")
    try:
        return Sentence(str(rec["id"]), list(words), spans, domain)
    except DataError as e:
        raise DataError(f"{where}: {e}") from None


def parse_dataset(stream: IO[str] | Iterable[str], label_set: LabelSet) -> list[Sentence]:
    """Parse JSONL records into sentences, reporting the offending line on error."""
    sentences = []
    seen: set[str] = set()
    for lineno, line in enumerate(stream, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise DataError(f"line {lineno}: invalid JSON ({e.msg})") from None
        sent = _sentence_from_record(rec, label_set, lineno)
        if sent.id in seen:
            raise DataError(f"line {lineno}: duplicate sentence id {sent.id!r}")
        seen.add(sent.id)
        sentences.append(sent)
    return sentences


def load_dataset(path, label_set: LabelSet) -> list[Sentence]:
    try:
        with open(path, encoding="utf-8") as f:
            return parse_dataset(f, label_set)
    except OSError as e:
        raise DataError(f"cannot read dataset {path}: {e.strerror}") from None
    except DataError as e:
        raise DataError(f"{path}: {e}") from None


def write_dataset(sentences: Iterable[Sentence], stream: IO[str]) -> None:
    """Serialize sentences in the same JSONL format parse_dataset reads."""
    for s in sentences:
        rec = {
            "id": s.id,
            "words": s.words,
            "spans": [
                {"label": sp.label, "start": sp.start, "end": sp.end} for sp in s.spans
            ],
        }
        if s.domain is not None:
            rec["domain"] = s.domain
        stream.write(json.dumps(rec, ensure_ascii=False) + "\n")


def save_dataset(sentences: Iterable[Sentence], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        write_dataset(sentences, f)
