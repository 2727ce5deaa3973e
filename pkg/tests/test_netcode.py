"""GF(4) arithmetic and the 2-of-4 cluster code."""

import itertools

import pytest
from hypothesis import given, strategies as st

from lrfhss_lab import netcode as nc

_GF4 = st.integers(0, 3)


class TestFieldArithmetic:
    def test_addition_is_xor(self):
        assert nc.gf4_add(1, 2) == 3
        assert nc.gf4_add(3, 3) == 0

    def test_multiplication_table(self):
        assert nc.gf4_mul(2, 2) == 3        # x * x = x + 1
        assert nc.gf4_mul(2, 3) == 1        # x * (x+1) = 1
        assert nc.gf4_mul(3, 3) == 2

    @given(_GF4, _GF4, _GF4)
    def test_distributivity(self, a, b, c):
        assert nc.gf4_mul(a, nc.gf4_add(b, c)) == \
            nc.gf4_add(nc.gf4_mul(a, b), nc.gf4_mul(a, c))

    @given(_GF4.filter(lambda a: a != 0))
    def test_inverse(self, a):
        assert nc.gf4_mul(a, nc.gf4_inv(a)) == 1

    def test_zero_has_no_inverse(self):
        with pytest.raises(ZeroDivisionError):
            nc.gf4_inv(0)

    def test_domain_check(self):
        with pytest.raises(ValueError):
            nc.gf4_add(4, 0)
        with pytest.raises(ValueError):
            nc.gf4_mul(0, -1)


class TestClusterCode:
    def test_generator_is_mds(self):
        assert nc.mds_check()

    def test_parity_construction(self):
        cw = nc.encode_cluster((1,), (2,))
        assert cw.p0 == (3,)                      # 1 + 2
        assert cw.p_ne == (nc.gf4_add(1, nc.gf4_mul(2, 2)),)

    def test_exhaustive_two_of_four(self):
        # all message pairs x all received subsets of size >= 2
        checked = 0
        for a, b in itertools.product(range(4), repeat=2):
            base = nc.encode_cluster((a,), (b,))
            for mask in itertools.product([True, False], repeat=4):
                if sum(mask) < 2:
                    continue
                cw = nc.ClusterCodeword(base.o0, base.o_ne, base.p0,
                                        base.p_ne, mask)
                assert nc.decode_cluster(cw) == ((a,), (b,))
                checked += 1
        assert checked == 16 * 11

    def test_single_packet_fails(self):
        cw = nc.encode_cluster((1,), (2,),
                               received_mask=(True, False, False, False))
        with pytest.raises(nc.DecodeFailure):
            nc.decode_cluster(cw)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            nc.encode_cluster((1, 2), (3,))

    @given(st.lists(_GF4, min_size=1, max_size=16),
           st.lists(_GF4, min_size=1, max_size=16))
    def test_parity_only_decode(self, o0, o_ne):
        n = min(len(o0), len(o_ne))
        o0, o_ne = tuple(o0[:n]), tuple(o_ne[:n])
        cw = nc.encode_cluster(o0, o_ne,
                               received_mask=(False, False, True, True))
        assert nc.decode_cluster(cw) == (o0, o_ne)


class TestRetransmissionFallback:
    def test_parities_degrade_to_copies(self):
        cw = nc.encode_cluster((1, 2), (3, 0), rt_fallback=True)
        assert cw.p0 == cw.o0 and cw.p_ne == cw.o0

    def test_copy_plus_partner_decodes(self):
        cw = nc.encode_cluster((1, 2), (3, 0), rt_fallback=True,
                               received_mask=(False, True, True, False))
        assert nc.decode_cluster(cw) == ((1, 2), (3, 0))

    def test_dependent_copies_fail_honestly(self):
        cw = nc.encode_cluster((1, 2), (3, 0), rt_fallback=True,
                               received_mask=(True, False, True, True))
        with pytest.raises(nc.DecodeFailure):
            nc.decode_cluster(cw)


class TestBytePacking:
    @given(st.binary(max_size=64))
    def test_round_trip(self, data):
        assert nc.symbols_to_bytes(nc.bytes_to_symbols(data)) == data

    def test_symbol_order(self):
        # 0b00_01_10_11 -> least-significant pair first
        assert nc.bytes_to_symbols(b"\x1b") == (3, 2, 1, 0)

    def test_length_validation(self):
        with pytest.raises(ValueError):
            nc.symbols_to_bytes((1, 2, 3))
