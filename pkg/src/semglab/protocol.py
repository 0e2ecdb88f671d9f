"""Framing codec for the simulated wristband byte stream.

Wire layout, 35 bytes per frame:

    offset  size  field
    0       2     sync word 0xAA 0x55
    2       1     seq, unsigned 8-bit wrapping counter
    3       24    8 sEMG channels, signed 24-bit big-endian two's complement
    27      6     3 accelerometer axes (x, y, z), signed 16-bit big-endian
    33      2     CRC-16/CCITT-FALSE over bytes 2..32 (seq + payload), big-endian

The decoder scans for the sync word, verifies the CRC, and resynchronises by
skipping a single byte after any CRC failure.  Corruption is counted, never
raised.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import FieldRangeError

SYNC = b"\xaa\x55"
FRAME_SIZE = 35
N_EMG = 8
N_ACCEL = 3

EMG_MIN, EMG_MAX = -(2**23), 2**23 - 1
ACCEL_MIN, ACCEL_MAX = -(2**15), 2**15 - 1

# ADS1299-style front end: Vref = 4.5 V, PGA gain 24, 24-bit full scale.
EMG_LSB_UV = 4.5 / (24 * (2**23 - 1)) * 1e6
# QMI8658-style accelerometer at +/-8 g: 4096 counts per g.
ACCEL_LSB_G = 1.0 / 4096.0


def _crc16_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x1021) if crc & 0x8000 else (crc << 1)
            crc &= 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _crc16_table()


def crc16_ccitt_false(data: bytes) -> int:
    """CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout."""
    crc = 0xFFFF
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _CRC_TABLE[((crc >> 8) ^ b) & 0xFF]
    return crc


@dataclass(frozen=True)
class Frame:
    """One wire sample: sequence counter, raw ADC counts, and its CRC.

    The CRC is derived from the other fields on construction, so a Frame can
    never carry an inconsistent checksum.
    """

    seq: int
    emg_counts: tuple[int, ...]
    accel_counts: tuple[int, ...]
    crc: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "emg_counts", tuple(int(v) for v in self.emg_counts))
        object.__setattr__(self, "accel_counts", tuple(int(v) for v in self.accel_counts))
        if not 0 <= self.seq <= 0xFF:
            raise FieldRangeError(f"seq {self.seq} outside [0, 255]")
        if len(self.emg_counts) != N_EMG:
            raise FieldRangeError(f"expected {N_EMG} EMG channels, got {len(self.emg_counts)}")
        if len(self.accel_counts) != N_ACCEL:
            raise FieldRangeError(f"expected {N_ACCEL} accel axes, got {len(self.accel_counts)}")
        for i, v in enumerate(self.emg_counts):
            if not EMG_MIN <= v <= EMG_MAX:
                raise FieldRangeError(f"emg_counts[{i}]={v} outside [{EMG_MIN}, {EMG_MAX}]")
        for i, v in enumerate(self.accel_counts):
            if not ACCEL_MIN <= v <= ACCEL_MAX:
                raise FieldRangeError(f"accel_counts[{i}]={v} outside [{ACCEL_MIN}, {ACCEL_MAX}]")
        object.__setattr__(self, "crc", crc16_ccitt_false(self._body()))

    def _body(self) -> bytes:
        out = bytearray([self.seq])
        for v in self.emg_counts:
            out += (v & 0xFFFFFF).to_bytes(3, "big")
        for v in self.accel_counts:
            out += (v & 0xFFFF).to_bytes(2, "big")
        return bytes(out)


def encode_frame(f: Frame) -> bytes:
    """Serialise a frame to its 35-byte wire form."""
    body = f._body()
    return SYNC + body + f.crc.to_bytes(2, "big")


def _signed(raw: int, bits: int) -> int:
    return raw - (1 << bits) if raw >= (1 << (bits - 1)) else raw


def _parse_body(body: bytes) -> Frame:
    seq = body[0]
    emg = tuple(
        _signed(int.from_bytes(body[1 + 3 * i : 4 + 3 * i], "big"), 24) for i in range(N_EMG)
    )
    accel = tuple(
        _signed(int.from_bytes(body[25 + 2 * i : 27 + 2 * i], "big"), 16) for i in range(N_ACCEL)
    )
    return Frame(seq=seq, emg_counts=emg, accel_counts=accel)


@dataclass
class DecodeState:
    """Streaming decoder state: carry-over bytes, last seq, and counters."""

    buffer: bytearray = field(default_factory=bytearray)
    last_seq: int | None = None
    frames_ok: int = 0
    frames_dropped: int = 0
    resyncs: int = 0


def decode_stream(state: DecodeState, chunk: bytes) -> list[Frame]:
    """Feed arbitrary bytes; return every complete, CRC-valid frame found.

    The result is invariant to how the byte stream is chunked.  CRC failures
    advance one byte past the false sync and bump ``resyncs``; sequence-number
    gaps bump ``frames_dropped`` by the wrapped difference minus one.
    """
    buf = state.buffer
    buf += chunk
    frames: list[Frame] = []
    pos = 0
    while True:
        j = buf.find(SYNC, pos)
        if j < 0:
            # Keep a trailing 0xAA: it may be the first half of a split sync.
            tail = len(buf) - 1 if buf and buf[-1] == SYNC[0] else len(buf)
            pos = max(pos, tail)
            break
        if len(buf) - j < FRAME_SIZE:
            pos = j
            break
        body = bytes(buf[j + 2 : j + 33])
        crc = int.from_bytes(buf[j + 33 : j + 35], "big")
        if crc16_ccitt_false(body) == crc:
            f = _parse_body(body)
            if state.last_seq is not None:
                state.frames_dropped += (f.seq - state.last_seq - 1) % 256
            state.last_seq = f.seq
            state.frames_ok += 1
            frames.append(f)
            pos = j + FRAME_SIZE
        else:
            state.resyncs += 1
            pos = j + 1
    del buf[:pos]
    return frames


def counts_to_physical(f: Frame) -> tuple[list[float], list[float]]:
    """Convert one frame's ADC counts to (emg in microvolts, accel in g)."""
    emg_uv = [v * EMG_LSB_UV for v in f.emg_counts]
    accel_g = [v * ACCEL_LSB_G for v in f.accel_counts]
    return emg_uv, accel_g


def physical_to_counts(emg_uv, accel_g) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Quantise physical units back to ADC counts (round-to-nearest, clipped)."""
    emg = tuple(
        min(max(int(round(v / EMG_LSB_UV)), EMG_MIN), EMG_MAX) for v in emg_uv
    )
    accel = tuple(
        min(max(int(round(v / ACCEL_LSB_G)), ACCEL_MIN), ACCEL_MAX) for v in accel_g
    )
    return emg, accel
