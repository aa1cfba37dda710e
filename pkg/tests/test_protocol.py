import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gahub import protocol
from gahub.ga import GaParams
from gahub.protocol import (
    ExperimentConfig,
    MigrationReply,
    MigrationReport,
    ParseError,
    SchemaError,
    ValidationError,
    decode_config,
    decode_reply,
    decode_report,
    encode_config,
    encode_reply,
    encode_report,
    genome_to_hex,
    hex_to_genome,
)

VECTORS = Path(__file__).resolve().parent.parent / "vectors"

# Frozen once from the reference encoder; these bytes are the wire contract.
REPORT_01 = (
    '{"best_fitness":16.0,"best_genome":"ff000000000000000000000000000000000000000000'
    '000000000000000000ff","client_id":"00112233445566778899aabbccddeeff",'
    '"evaluations_delta":1000,"experiment_id":1,"protocol_version":1,"segment_index":1}'
)
REPLY_02 = (
    '{"experiment_id":3,"generations_to_run":0,"immigrant_fitness":16.0,'
    '"immigrant_genome":"ff000000000000000000000000000000000000000000000000000000000000ff",'
    '"protocol_version":1}'
)


def bits(hex_text, n):
    return hex_to_genome(hex_text, n)


# -- genome hex codec ---------------------------------------------------------------


def test_zero_genome_encodes_to_64_zero_chars():
    assert genome_to_hex(np.zeros(256, dtype=np.uint8)) == "0" * 64


def test_hex_codec_roundtrip_odd_nibble_lengths():
    # 12-bit genomes: 3 hex chars, exercises the non-byte-aligned path
    for value in range(4096):
        text = format(value, "03x")
        genome = hex_to_genome(text, 12)
        assert genome_to_hex(genome) == text


def test_hex_length_mismatch_rejected():
    with pytest.raises(ValidationError):
        hex_to_genome("ff", 256)


def test_hex_bad_characters_rejected():
    with pytest.raises(ValidationError):
        hex_to_genome("zz" * 32, 256)


def test_msb_first_bit_order():
    genome = hex_to_genome("80", 8)
    assert list(genome) == [1, 0, 0, 0, 0, 0, 0, 0]


# -- message round trips ---------------------------------------------------------------

genomes = st.integers(min_value=0, max_value=2**64 - 1).map(
    lambda v: hex_to_genome(format(v, "016x"), 64)
)


@st.composite
def reports(draw):
    return MigrationReport(
        experiment_id=draw(st.integers(1, 10**6)),
        client_id=draw(st.text(alphabet="0123456789abcdef", min_size=1, max_size=32)),
        segment_index=draw(st.integers(1, 10**6)),
        best_genome=draw(genomes),
        best_fitness=float(draw(st.integers(0, 64))),
        evaluations_delta=draw(st.integers(1, 10**7)),
    )


@st.composite
def replies(draw):
    return MigrationReply(
        experiment_id=draw(st.integers(1, 10**6)),
        immigrant_genome=draw(genomes),
        immigrant_fitness=float(draw(st.integers(0, 64))),
        generations_to_run=draw(st.integers(0, 10**4)),
    )


@settings(max_examples=300, deadline=None)
@given(reports())
def test_report_roundtrip(report):
    assert decode_report(encode_report(report), 64) == report


@settings(max_examples=300, deadline=None)
@given(replies())
def test_reply_roundtrip(reply):
    assert decode_reply(encode_reply(reply), 64) == reply


def test_config_roundtrip():
    config = ExperimentConfig(
        experiment_id=7,
        ga=GaParams(genome_length=64, population_size=20, block_size=4, block_reward=4.0),
        evaluation_budget=5000,
        generations_per_segment=10,
    )
    assert decode_config(encode_config(config)) == config


def test_reply_stop_semantics():
    reply = MigrationReply(1, np.zeros(64, dtype=np.uint8), 0.0, 0)
    assert decode_reply(encode_reply(reply), 64).stop
    reply = MigrationReply(1, np.zeros(64, dtype=np.uint8), 0.0, 20)
    assert not decode_reply(encode_reply(reply), 64).stop


# -- decode errors --------------------------------------------------------------------


def test_empty_string_is_parse_error():
    with pytest.raises(ParseError):
        decode_report("")


def test_non_object_is_schema_error():
    with pytest.raises(SchemaError):
        decode_report("[1,2,3]")


def test_missing_field_is_schema_error():
    obj = json.loads(REPORT_01)
    del obj["client_id"]
    with pytest.raises(SchemaError):
        decode_report(json.dumps(obj))


def test_wrong_type_is_schema_error():
    obj = json.loads(REPORT_01)
    obj["evaluations_delta"] = "many"
    with pytest.raises(SchemaError):
        decode_report(json.dumps(obj))


def test_negative_delta_is_validation_error():
    obj = json.loads(REPORT_01)
    obj["evaluations_delta"] = -5
    with pytest.raises(ValidationError):
        decode_report(json.dumps(obj))


def test_genome_length_mismatch_is_validation_error():
    with pytest.raises(ValidationError):
        decode_report(REPORT_01, genome_length=64)


def test_unknown_fields_are_ignored():
    obj = json.loads(REPORT_01)
    obj["x_extension"] = {"future": True}
    report = decode_report(json.dumps(obj), 256)
    assert report == decode_report(REPORT_01, 256)


# -- frozen canonical vectors ------------------------------------------------------------


def test_canonical_report_vector_bytes():
    assert (VECTORS / "report_01.json").read_text(encoding="utf-8") == REPORT_01
    decoded = decode_report(REPORT_01, 256)
    assert decoded.best_fitness == 16.0
    assert decoded.client_id == "00112233445566778899aabbccddeeff"
    assert encode_report(decoded) == REPORT_01


def test_canonical_reply_vector_bytes():
    assert (VECTORS / "reply_02.json").read_text(encoding="utf-8") == REPLY_02
    decoded = decode_reply(REPLY_02, 256)
    assert decoded.stop
    assert decoded.immigrant_fitness == 16.0
    assert encode_reply(decoded) == REPLY_02


def test_all_vector_files_match_the_encoder():
    from gahub.vectors import check_vectors

    assert check_vectors(VECTORS) == []


def test_fitness_corpus_is_committed_and_coherent():
    corpus = json.loads((VECTORS / "fitness_corpus.json").read_text(encoding="utf-8"))
    assert len(corpus["entries"]) == 1000
    assert corpus["entries"][0]["fitness"] == 0.0
    assert corpus["entries"][1]["fitness"] == 256.0
