"""The structured prompt templates and their decoders.

The four marker phrases are the whole wire format: rendering writes them
with exact spacing and punctuation, decoding splits on them left to right.
"""

from zerorte import (
    DecodeError,
    RelationTriplet,
    Sample,
    decode_extractor_output,
    decode_generator_output,
    encode_extractor_example,
    encode_generator_example,
    encode_zerorc_prefix,
)

sample = Sample(
    "Nicolas Tindal was promoted to Captain.",
    (RelationTriplet("Nicolas Tindal", "Captain", "Military Rank"),),
)

prompt, target = encode_generator_example("Military Rank", sample)
print("generator prompt: ", prompt)
print("generator target: ", target)

source, ext_target = encode_extractor_example(sample, sample.triplets[0])
print("extractor input:  ", source)
print("extractor target: ", ext_target)

print("zerorc prefix:    ", encode_zerorc_prefix(sample, "Nicolas Tindal", "Captain"))

# Decoding is the inverse of rendering for marker-free fields.
decoded = decode_extractor_output(ext_target)
print("\ndecoded triplet:", (decoded.head, decoded.tail, decoded.label))

regen = decode_generator_output(target, label="Military Rank")
print("decoded sample: ", regen.sentence)

# Malformed generations raise typed decode errors; extraction callers map
# them to the null prediction.
for bad in (
    "Head Entity: Nicolas",                                   # truncated
    "Head Entity: , Tail Entity: X, Relation: Y.",            # empty field
    "Tail Entity: b, Head Entity: a, Relation: r.",           # permuted markers
):
    try:
        decode_extractor_output(bad)
    except DecodeError as e:
        print(f"rejected {bad!r}: {type(e).__name__}")
