"""Built-in fuzz targets.

Behavioral models of two historically buggy parsers plus a spin loop for
hang handling. Each target carries a rodata-style blob of its string
constants; the built-in dictionary is scraped from that blob the same way
an external binary's would be.

Block ids are arbitrary but fixed; every control-flow decision worth
distinguishing gets its own block so coverage exposes a gradient toward
the seeded bugs.
"""

from __future__ import annotations

from .coverage import TraceRecorder
from .executor import Target, register_target, scrape_dictionary
from .mutation import Dictionary

# --- keyword_server --------------------------------------------------------
#
# Newline-separated command stream. Every line must start with a known
# keyword. SEND caches a page; VISUALIZE renders the cache, and on the
# many-pages/large-payload path it indexes a render-slot table that was
# never populated.

KEYWORDS = (b"SEND", b"QUERY", b"INTERACT", b"VISUALIZE", b"REQUEST")

VIS_PAGE_MIN = 2
VIS_PAYLOAD_LIMIT = 64

KEYWORD_RODATA = (
    b"\x7fELF\x02\x01\x01\x00\x00"
    b"SEND\x00QUERY\x00INTERACT\x00VISUALIZE\x00REQUEST\x00PING\x00"
    b"page store full\x00\x01\x02kwsd/0.2\x00"
)


def _keyword_server(data: bytes, rec: TraceRecorder) -> None:
    rec.hit(0x1101)
    pages: list[bytes] = []
    total_payload = 0
    for line in data.split(b"\n"):
        rec.hit(0x1102)
        if line.startswith(b"SEND"):
            rec.hit(0x1110)
            payload = line[4:]
            pages.append(payload)
            total_payload += len(payload)
            if len(payload) > 16:
                rec.hit(0x1111)
            else:
                rec.hit(0x1112)
        elif line.startswith(b"QUERY"):
            rec.hit(0x1120)
            needle = line[5:].strip()
            found = False
            for page in pages:
                rec.hit(0x1121)
                if needle and needle in page:
                    found = True
                    break
            if found:
                rec.hit(0x1122)
            else:
                rec.hit(0x1123)
        elif line.startswith(b"INTERACT"):
            rec.hit(0x1130)
            if line[8:].strip() == b"PING":
                rec.hit(0x1131)
            else:
                rec.hit(0x1132)
        elif line.startswith(b"VISUALIZE"):
            rec.hit(0x1140)
            if len(pages) >= VIS_PAGE_MIN:
                rec.hit(0x1141)
                if total_payload > VIS_PAYLOAD_LIMIT:
                    rec.hit(0x1142)
                    # the overflow path never grew the slot table
                    render_slots: list[bytes] = []
                    render_slots[len(pages)]
                else:
                    rec.hit(0x1143)
            else:
                rec.hit(0x1144)
        elif line.startswith(b"REQUEST"):
            rec.hit(0x1150)
            if pages:
                rec.hit(0x1151)
            else:
                rec.hit(0x1152)
        else:
            rec.hit(0x11F0)
    rec.hit(0x11FE)


# --- tlv_parser -------------------------------------------------------------
#
# Recursive tag/length/value decoder, deliberately relaxed: a length field
# larger than the remaining buffer just reads short. The decoder keeps a
# 1-byte running total of the length fields it has seen; deep nesting with
# a wrapped accumulator hits the seeded bug.

TAG_CONSTRUCTED = 0x20
TLV_BUG_DEPTH = 16
TLV_HARD_DEPTH = 20

TLV_RODATA = b"\x00\x01asl6\x00v0.3\x00TLV\x00\xfe"


def _tlv_parser(data: bytes, rec: TraceRecorder) -> None:
    rec.hit(0x2101)
    state = {"acc": 0, "overflow": False}
    _parse_tlv(data, rec, 1, state)
    rec.hit(0x21FE)


def _parse_tlv(buf: bytes, rec: TraceRecorder, depth: int, state: dict) -> None:
    rec.hit(0x2200 + depth)  # one block per nesting level
    i = 0
    while i < len(buf):
        rec.hit(0x2110)
        tag = buf[i]
        if i + 1 >= len(buf):
            rec.hit(0x2111)
            return
        length = buf[i + 1]
        state["acc"] += length
        if state["acc"] > 0xFF:
            state["acc"] &= 0xFF
            state["overflow"] = True
            rec.hit(0x2112)
        value = buf[i + 2 : i + 2 + length]
        if tag & TAG_CONSTRUCTED:
            rec.hit(0x2113)
            if depth > TLV_BUG_DEPTH and state["overflow"]:
                rec.hit(0x2114)
                raise OverflowError(
                    f"length accumulator corrupted at depth {depth}"
                )
            if depth < TLV_HARD_DEPTH:
                _parse_tlv(value, rec, depth + 1, state)
            else:
                rec.hit(0x2115)
        else:
            if length == 0:
                rec.hit(0x2116)
            elif length < 8:
                rec.hit(0x2117)
            else:
                rec.hit(0x2118)
        i += 2 + length


# --- spin_hang --------------------------------------------------------------

SPIN_MAGIC = 0xA5


def _spin_hang(data: bytes, rec: TraceRecorder) -> None:
    rec.hit(0x3101)
    if data and data[0] == SPIN_MAGIC:
        rec.hit(0x3102)
        while True:  # burns the instrumentation budget
            rec.hit(0x3103)
    if len(data) > 4:
        rec.hit(0x3105)
    else:
        rec.hit(0x3106)
    rec.hit(0x31FE)


KEYWORD_SERVER = register_target(
    Target("keyword_server", _keyword_server, scrape_dictionary(KEYWORD_RODATA))
)
TLV_PARSER = register_target(
    Target("tlv_parser", _tlv_parser, scrape_dictionary(TLV_RODATA))
)
SPIN_HANG = register_target(Target("spin_hang", _spin_hang, Dictionary()))
