import numpy as np
import pytest

from rlnc_codec import (MUL_TABLE, PRIMITIVE_POLY, CodedPacket, CodingError, DecoderState, EchelonBasis,
                        PacketKind, combine_payloads, decoder_ingest, encode_window, field_add, field_div,
                        field_inv, field_mul)


def _raw(count, size=8, seed=3):
    rng = np.random.default_rng(seed)
    return {i: rng.integers(0, 256, size, dtype=np.uint8) for i in range(1, count + 1)}


def test_field_mul_reduces_by_primitive_polynomial():
    assert field_mul(2, 0x80) == 0x1D
    assert field_mul(0, 77) == 0
    assert field_mul(1, 77) == 77
    assert field_add(0x53, 0xCA) == 0x99


def test_every_nonzero_element_has_inverse():
    for a in range(1, 256):
        assert field_mul(a, field_inv(a)) == 1
        assert field_div(a, a) == 1


def test_field_inverse_of_zero_raises():
    with pytest.raises(CodingError):
        field_inv(0)


ELEMENTS = np.arange(256)


def _polynomial_product(a, b):
    """Multiplicação bit a bit com redução pelo polinômio primitivo"""
    a = a.astype(np.int32)
    b = b.astype(np.int32)
    product = np.zeros_like(a)
    for _ in range(8):
        product = product ^ np.where(b & 1, a, 0)
        b = b >> 1
        a = a << 1
        a = np.where(a & 0x100, a ^ PRIMITIVE_POLY, a)
    return product


def test_field_mul_matches_polynomial_product_for_all_pairs():
    a, b = np.meshgrid(ELEMENTS, ELEMENTS, indexing='ij')
    np.testing.assert_array_equal(MUL_TABLE, _polynomial_product(a, b))
    np.testing.assert_array_equal(np.vectorize(field_mul)(a, b), MUL_TABLE)


def test_field_mul_identity_commutativity_and_inverses_for_all_elements():
    np.testing.assert_array_equal(MUL_TABLE, MUL_TABLE.T)
    np.testing.assert_array_equal(MUL_TABLE[1], ELEMENTS)
    assert not MUL_TABLE[0].any()
    for a in range(1, 256):
        # sem divisores de zero: cada linha não nula é uma permutação
        np.testing.assert_array_equal(np.sort(MUL_TABLE[a]), ELEMENTS)
        assert field_mul(a, field_inv(a)) == 1


def test_field_mul_is_associative_and_distributive_for_all_triples():
    b, c = np.meshgrid(ELEMENTS, ELEMENTS, indexing='ij')
    for a in range(256):
        np.testing.assert_array_equal(MUL_TABLE[MUL_TABLE[a]], MUL_TABLE[a][MUL_TABLE])
        np.testing.assert_array_equal(MUL_TABLE[a][b ^ c], MUL_TABLE[a][b] ^ MUL_TABLE[a][c])


def test_encode_window_with_fixed_coefficients():
    raw = _raw(3)
    pkt = encode_window(raw, (2, 3), np.random.default_rng(0), coeffs=np.array([1, 1], dtype=np.uint8))
    assert pkt.span == 2
    assert pkt.window == (2, 3)
    np.testing.assert_array_equal(pkt.payload, raw[2] ^ raw[3])


def test_encode_window_draws_nonzero_coefficients(rng):
    pkt = encode_window(None, (1, 50), rng, kind=PacketKind.FEC)
    assert pkt.payload is None
    assert np.all(pkt.coeffs > 0)
    assert pkt.to_dict()['kind'] == "fec"


def test_empty_window_is_rejected(rng):
    with pytest.raises(CodingError):
        encode_window(None, (5, 4), rng)


def test_coefficient_length_must_match_span():
    with pytest.raises(CodingError):
        CodedPacket(seq_id=0, w_min=1, w_max=3, coeffs=np.array([1, 2], dtype=np.uint8))


def test_missing_raw_packet_is_reported(rng):
    with pytest.raises(CodingError):
        encode_window({1: np.zeros(4, dtype=np.uint8)}, (1, 2), rng)


def test_uncoded_packets_decode_immediately(rng):
    decoder = DecoderState()
    for i in range(1, 6):
        report = decoder_ingest(decoder, encode_window(None, (i, i), rng))
        assert report.innovative
        assert report.newly_in_order == 1
    assert decoder.decoded_prefix == 5
    assert decoder.rank == 5


def test_two_combinations_release_both_packets():
    raw = _raw(2)
    rng = np.random.default_rng(0)
    decoder = DecoderState(keep_payload=True)

    first = decoder.ingest(encode_window(raw, (1, 2), rng, coeffs=np.array([1, 1], dtype=np.uint8)))
    assert first.innovative and first.newly_in_order == 0
    assert decoder.rank == 1

    second = decoder.ingest(encode_window(raw, (1, 2), rng, coeffs=np.array([1, 2], dtype=np.uint8)))
    assert second.newly_in_order == 2
    np.testing.assert_array_equal(decoder.decoded_payloads[1], raw[1])
    np.testing.assert_array_equal(decoder.decoded_payloads[2], raw[2])


def test_dependent_combination_is_not_innovative():
    rng = np.random.default_rng(0)
    decoder = DecoderState()
    decoder.ingest(encode_window(None, (1, 3), rng, coeffs=np.array([1, 2, 3], dtype=np.uint8)))
    scaled = np.array([field_mul(7, c) for c in (1, 2, 3)], dtype=np.uint8)
    report = decoder.ingest(encode_window(None, (1, 3), rng, coeffs=scaled))
    assert not report.innovative
    assert decoder.rank == 1


def test_packet_fully_inside_decoded_prefix_is_ignored(rng):
    decoder = DecoderState()
    for i in (1, 2, 3):
        decoder.ingest(encode_window(None, (i, i), rng))
    report = decoder.ingest(encode_window(None, (1, 3), rng))
    assert not report.innovative
    assert decoder.received_count == 4


def test_overlap_with_decoded_prefix_is_cancelled():
    raw = _raw(3)
    rng = np.random.default_rng(1)
    decoder = DecoderState(keep_payload=True)
    decoder.ingest(encode_window(raw, (1, 1), rng))
    decoder.ingest(encode_window(raw, (2, 2), rng))

    report = decoder.ingest(encode_window(raw, (2, 3), rng, coeffs=np.array([9, 4], dtype=np.uint8)))
    assert report.newly_in_order == 1
    np.testing.assert_array_equal(decoder.decoded_payloads[3], raw[3])


def test_random_dense_combinations_recover_every_payload():
    raw = _raw(30, size=12, seed=8)
    rng = np.random.default_rng(99)
    decoder = DecoderState(keep_payload=True)
    for seq in range(40):
        decoder.ingest(encode_window(raw, (1, 30), rng, seq_id=seq))
        if decoder.decoded_prefix == 30:
            break
    assert decoder.decoded_prefix == 30
    for i, payload in raw.items():
        np.testing.assert_array_equal(decoder.decoded_payloads[i], payload)


def test_sliding_windows_decode_in_order_with_payloads():
    raw = _raw(60, seed=5)
    rng = np.random.default_rng(21)
    decoder = DecoderState(keep_payload=True)
    prefixes = []
    for i in range(1, 61):
        decoder.ingest(encode_window(raw, (max(1, i - 4), i), rng))
        prefixes.append(decoder.decoded_prefix)

    assert prefixes == sorted(prefixes)
    assert decoder.decoded_prefix == 60
    assert all(np.array_equal(decoder.decoded_payloads[i], raw[i]) for i in raw)


def test_payload_mode_requires_payload(rng):
    decoder = DecoderState(keep_payload=True)
    with pytest.raises(CodingError):
        decoder.ingest(encode_window(None, (1, 2), rng))


def test_combine_payloads_matches_manual_sum():
    payloads = np.array([[1, 2, 3], [4, 5, 6]], dtype=np.uint8)
    coeffs = np.array([3, 7], dtype=np.uint8)
    expected = np.array([field_mul(3, a) ^ field_mul(7, b) for a, b in zip(payloads[0], payloads[1])])
    np.testing.assert_array_equal(combine_payloads(coeffs, payloads), expected)


def test_recoded_combination_stays_in_span(rng):
    basis = EchelonBasis()
    for lo, hi in ((1, 3), (2, 5), (4, 6)):
        pkt = encode_window(None, (lo, hi), rng)
        basis.insert(pkt.w_min, pkt.coeffs)

    lo, hi, coeffs, payload = basis.combine(rng)
    assert payload is None
    assert 1 <= lo <= hi <= 6
    assert basis.reduce(lo, coeffs) is None


def test_prune_below_drops_closed_rows(rng):
    basis = EchelonBasis()
    basis.insert(1, np.array([1, 5], dtype=np.uint8))
    basis.insert(5, np.array([2, 3], dtype=np.uint8))
    assert basis.prune_below(4) == 1
    assert list(basis.rows) == [5]
    assert EchelonBasis().combine(rng) is None
