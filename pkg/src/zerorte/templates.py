"""Structured prompt templates: rendering and parsing of relation texts.

The four marker phrases below are a wire-visible contract shared with any
remote backend service, fixed bit-exactly: single space after each colon,
comma-space between fields, terminal period.

    generator prompt   "Relation: <label>."
    generator target   "Context: <sentence>. Head Entity: <head>, Tail Entity: <tail>."
    extractor input    "Context: <sentence>."
    extractor target   "Head Entity: <head>, Tail Entity: <tail>, Relation: <label>."
    zerorc prefix      "Context: <sentence>. Head Entity: <head>, Tail Entity: <tail>, Relation:"

Sentences are embedded verbatim; a sentence ending in "." produces "..",
which decoding tolerates by stripping at most one trailing period.  Fields
containing a marker phrase are rejected at encode time instead of escaped.
"""

from __future__ import annotations

from .corpus import RelationTriplet, Sample

__all__ = [
    "CONTEXT_MARKER",
    "HEAD_MARKER",
    "TAIL_MARKER",
    "RELATION_MARKER",
    "MARKERS",
    "DecodeError",
    "MissingMarker",
    "EntityNotInContext",
    "EmptyField",
    "ReservedPhrase",
    "TemplateError",
    "generator_prompt",
    "encode_generator_example",
    "decode_generator_output",
    "extractor_input",
    "encode_extractor_example",
    "decode_extractor_output",
    "encode_zerorc_prefix",
]

CONTEXT_MARKER = "Context:"
HEAD_MARKER = "Head Entity:"
TAIL_MARKER = "Tail Entity:"
RELATION_MARKER = "Relation:"
MARKERS = (CONTEXT_MARKER, HEAD_MARKER, TAIL_MARKER, RELATION_MARKER)


class TemplateError(ValueError):
    """A field handed to an encoder violates the template contract."""


class DecodeError(ValueError):
    """Structured text could not be parsed back into relation data."""


class MissingMarker(DecodeError):
    def __init__(self, marker: str):
        super().__init__(f"marker {marker!r} absent or out of order")
        self.marker = marker


class EntityNotInContext(DecodeError):
    def __init__(self, entity: str):
        super().__init__(f"entity {entity!r} not found in the decoded context")
        self.entity = entity


class EmptyField(DecodeError):
    def __init__(self, fieldname: str):
        super().__init__(f"field {fieldname!r} is empty")
        self.fieldname = fieldname


class ReservedPhrase(DecodeError):
    """A decoded field embeds a marker phrase, so it could never be re-encoded."""

    def __init__(self, fieldname: str, marker: str):
        super().__init__(f"field {fieldname!r} contains reserved phrase {marker!r}")
        self.fieldname = fieldname
        self.marker = marker


def _clean_field(value: str, fieldname: str) -> str:
    value = value.strip()
    if not value:
        raise TemplateError(f"{fieldname} must be non-empty")
    for marker in MARKERS:
        if marker in value:
            raise TemplateError(f"{fieldname} contains reserved phrase {marker!r}")
    return value


def _split_after(text: str, marker: str) -> tuple[str, str]:
    """Text before the first occurrence of ``marker`` and text after it."""
    idx = text.find(marker)
    if idx < 0:
        raise MissingMarker(marker)
    return text[:idx], text[idx + len(marker):]


def _strip_one(value: str, suffix: str) -> str:
    value = value.strip()
    if value.endswith(suffix):
        value = value[: -len(suffix)].rstrip()
    return value


def _require(value: str, fieldname: str) -> str:
    if not value:
        raise EmptyField(fieldname)
    for marker in MARKERS:
        if marker in value:
            raise ReservedPhrase(fieldname, marker)
    return value


def generator_prompt(label: str) -> str:
    """The conditioning prompt for one relation label."""
    return f"Relation: {_clean_field(label, 'label')}."


def encode_generator_example(label: str, sample: Sample) -> tuple[str, str]:
    """Render a single-triplet sample as a (prompt, target) generator pair.

    The concatenation ``prompt + " " + target`` is the training sequence for
    an autoregressive generator backend.
    """
    if len(sample.triplets) != 1:
        raise TemplateError("generator examples are single-triplet by design")
    triplet = sample.triplets[0]
    if triplet.label != label:
        raise TemplateError(
            f"sample label {triplet.label!r} does not match prompt label {label!r}"
        )
    sentence = _clean_field(sample.sentence, "sentence")
    head = _clean_field(triplet.head, "head")
    tail = _clean_field(triplet.tail, "tail")
    prompt = generator_prompt(label)
    target = f"Context: {sentence}. Head Entity: {head}, Tail Entity: {tail}."
    return prompt, target


def decode_generator_output(text: str, label: str) -> Sample:
    """Parse generated structured text into a single-triplet sample.

    ``label`` is the prompt label the generation was conditioned on; the
    generated target itself carries no label field.  Text before "Context:"
    is ignored since generators may echo the prompt.  Raises a
    :class:`DecodeError` subclass on any malformed output.
    """
    _, rest = _split_after(text, CONTEXT_MARKER)
    context_part, rest = _split_after(rest, HEAD_MARKER)
    head_part, tail_part = _split_after(rest, TAIL_MARKER)

    sentence = _require(_strip_one(context_part, "."), "sentence")
    head = _require(_strip_one(head_part, ","), "head")
    tail = _require(_strip_one(tail_part, "."), "tail")
    if head not in sentence:
        raise EntityNotInContext(head)
    if tail not in sentence:
        raise EntityNotInContext(tail)
    return Sample(
        sentence=sentence,
        triplets=(RelationTriplet(head=head, tail=tail, label=label),),
    )


def extractor_input(sentence: str) -> str:
    return f"Context: {_clean_field(sentence, 'sentence')}."


def encode_extractor_example(sample: Sample, triplet: RelationTriplet) -> tuple[str, str]:
    """Render one (input, target) extractor pair for a triplet of the sample."""
    if triplet not in sample.triplets:
        raise TemplateError("triplet does not belong to the sample")
    head = _clean_field(triplet.head, "head")
    tail = _clean_field(triplet.tail, "tail")
    label = _clean_field(triplet.label, "label")
    target = f"Head Entity: {head}, Tail Entity: {tail}, Relation: {label}."
    return extractor_input(sample.sentence), target


def decode_extractor_output(text: str) -> RelationTriplet:
    """Parse generated extractor text into a triplet.

    Callers map :class:`DecodeError` to the null prediction; the substring
    check against the input sentence is the caller's concern, since the
    extractor target does not embed the context.
    """
    _, rest = _split_after(text, HEAD_MARKER)
    head_part, rest = _split_after(rest, TAIL_MARKER)
    tail_part, label_part = _split_after(rest, RELATION_MARKER)

    head = _require(_strip_one(head_part, ","), "head")
    tail = _require(_strip_one(tail_part, ","), "tail")
    label = _require(_strip_one(label_part, "."), "label")
    return RelationTriplet(head=head, tail=tail, label=label)


def encode_zerorc_prefix(sample: Sample | str, head: str, tail: str) -> str:
    """Decoder prefix for entity-conditioned relation classification.

    Accepts a sample or a bare sentence.  Ends exactly with "Relation:"
    (no trailing space) so the next generated tokens spell the label.
    """
    raw_sentence = sample.sentence if isinstance(sample, Sample) else sample
    head = _clean_field(head, "head")
    tail = _clean_field(tail, "tail")
    sentence = _clean_field(raw_sentence, "sentence")
    if head not in raw_sentence:
        raise TemplateError(f"head {head!r} is not a substring of the sentence")
    if tail not in raw_sentence:
        raise TemplateError(f"tail {tail!r} is not a substring of the sentence")
    return f"Context: {sentence}. Head Entity: {head}, Tail Entity: {tail}, Relation:"
