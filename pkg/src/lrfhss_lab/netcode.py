"""GF(4) arithmetic and the 2-of-4 cluster code.

Symbols live in {0,1,2,3} with polynomial basis over x²+x+1.  A cluster
of two cooperating devices transmits its two original packets plus two
parity packets; any two of the four recover both originals (the four
coefficient rows form an MDS generator).
"""

from __future__ import annotations

from dataclasses import dataclass

# multiplication table for GF(4), row-major over (a, b)
_MUL = (
    (0, 0, 0, 0),
    (0, 1, 2, 3),
    (0, 2, 3, 1),
    (0, 3, 1, 2),
)

# multiplicative inverses of 1, 2, 3
_INV = (None, 1, 3, 2)

#: coefficient rows mapping (o0, o_ne) to the four transmitted packets
CODE_ROWS = ((1, 0), (0, 1), (1, 1), (1, 2))


def gf4_add(a: int, b: int) -> int:
    _check(a), _check(b)
    return a ^ b


def gf4_mul(a: int, b: int) -> int:
    _check(a), _check(b)
    return _MUL[a][b]


def gf4_inv(a: int) -> int:
    _check(a)
    if a == 0:
        raise ZeroDivisionError("0 has no inverse in GF(4)")
    return _INV[a]


def _check(a: int) -> None:
    if a not in (0, 1, 2, 3):
        raise ValueError(f"not a GF(4) element: {a!r}")


@dataclass(frozen=True)
class ClusterCodeword:
    """The four packets of one cluster plus which of them were received
    (order: o0, o_ne, p0, p_ne)."""
    o0: tuple[int, ...]
    o_ne: tuple[int, ...]
    p0: tuple[int, ...]
    p_ne: tuple[int, ...]
    received_mask: tuple[bool, bool, bool, bool]
    rows: tuple[tuple[int, int], ...] = CODE_ROWS

    def packets(self) -> tuple[tuple[int, ...], ...]:
        return (self.o0, self.o_ne, self.p0, self.p_ne)


class DecodeFailure(Exception):
    """Fewer than two cluster packets survived."""


def encode_cluster(o0, o_ne, rt_fallback: bool = False,
                   received_mask=(True, True, True, True)) -> ClusterCodeword:
    """Build parity packets p0 = o0 ⊞ o_ne and p_ne = o0 ⊞ 2⊠o_ne.

    With ``rt_fallback`` (D2D exchange failed) the partner coefficients are
    zeroed and both parities degrade to plain copies of o0.
    """
    o0 = tuple(o0)
    o_ne = tuple(o_ne)
    if len(o0) != len(o_ne):
        raise ValueError("payloads must have equal length")
    if rt_fallback:
        p0 = o0
        p_ne = o0
        rows = ((1, 0), (0, 1), (1, 0), (1, 0))
    else:
        p0 = tuple(gf4_add(a, b) for a, b in zip(o0, o_ne))
        p_ne = tuple(gf4_add(a, gf4_mul(2, b)) for a, b in zip(o0, o_ne))
        rows = CODE_ROWS
    return ClusterCodeword(o0=o0, o_ne=o_ne, p0=p0, p_ne=p_ne,
                           received_mask=tuple(received_mask), rows=rows)


def decode_cluster(cw: ClusterCodeword) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Recover (o0, o_ne) from any >= 2 received packets by 2x2 Gaussian
    elimination over GF(4).  Raises DecodeFailure when fewer than two
    packets survived."""
    received = [(cw.rows[i], pkt)
                for i, (pkt, ok) in enumerate(zip(cw.packets(), cw.received_mask))
                if ok]
    if len(received) < 2:
        raise DecodeFailure(f"only {len(received)} packet(s) received")
    (r1, v1), (r2, v2) = received[0], received[1]
    a, b = r1
    c, d = r2
    det = gf4_add(gf4_mul(a, d), gf4_mul(b, c))
    if det == 0:
        # cannot happen for distinct MDS rows; possible only when the RT
        # fallback collapsed parities onto o0's row
        raise DecodeFailure("received packets are linearly dependent")
    inv_det = gf4_inv(det)
    o0 = []
    o_ne = []
    for s1, s2 in zip(v1, v2):
        # Cramer solve of [a b; c d] [x y]^T = [s1 s2]^T
        x = gf4_mul(inv_det, gf4_add(gf4_mul(d, s1), gf4_mul(b, s2)))
        y = gf4_mul(inv_det, gf4_add(gf4_mul(c, s1), gf4_mul(a, s2)))
        o0.append(x)
        o_ne.append(y)
    return tuple(o0), tuple(o_ne)


def mds_check() -> bool:
    """All 6 row pairs of the generator have nonzero 2x2 determinant."""
    rows = CODE_ROWS
    for i in range(4):
        for j in range(i + 1, 4):
            a, b = rows[i]
            c, d = rows[j]
            if gf4_add(gf4_mul(a, d), gf4_mul(b, c)) == 0:
                return False
    return True


def bytes_to_symbols(data: bytes) -> tuple[int, ...]:
    """Each byte becomes four GF(4) symbols, least-significant 2 bits first."""
    out = []
    for byte in data:
        for shift in (0, 2, 4, 6):
            out.append((byte >> shift) & 0x3)
    return tuple(out)


def symbols_to_bytes(symbols) -> bytes:
    symbols = tuple(symbols)
    if len(symbols) % 4 != 0:
        raise ValueError("symbol count must be a multiple of 4")
    out = bytearray()
    for i in range(0, len(symbols), 4):
        byte = 0
        for j, shift in enumerate((0, 2, 4, 6)):
            byte |= symbols[i + j] << shift
        out.append(byte)
    return bytes(out)
