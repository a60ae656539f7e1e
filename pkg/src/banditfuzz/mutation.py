"""Mutation operators, havoc stacking and the deterministic sweep.

The sixteen havoc operators double as bandit arms, so their identity and
order here is load-bearing: distributions, count files and reports are all
keyed by MutationOperator values in definition order.
"""

from __future__ import annotations

import enum
import random
from typing import TYPE_CHECKING, Iterator

if TYPE_CHECKING:
    from .scheduler import OperatorDistribution

MAX_INPUT = 1 << 20

ARITH_MAX = 35

# Values picked for their boundary behavior (off-by-one, sign flips,
# truncation). The word/dword lists extend the narrower ones.
INTERESTING_8 = (-128, -1, 0, 1, 16, 32, 64, 100, 127)
INTERESTING_16 = INTERESTING_8 + (
    -32768, -129, 128, 255, 256, 512, 1000, 1024, 4096, 32767,
)
INTERESTING_32 = INTERESTING_16 + (
    -2147483648, -100663046, -32769, 32768, 65535, 65536, 100663045, 2147483647,
)

# Havoc stack sizes: powers of two from 2^1 to 2^7.
STACK_POWERS = (2, 4, 8, 16, 32, 64, 128)

BLOCK_MAX = 32768


class MutationOperator(enum.Enum):
    BIT_FLIP = "bit_flip"
    INTERESTING_BYTE = "interesting_byte"
    INTERESTING_WORD = "interesting_word"
    INTERESTING_DWORD = "interesting_dword"
    ADD_BYTE = "add_byte"
    ADD_WORD = "add_word"
    ADD_DWORD = "add_dword"
    SUB_BYTE = "sub_byte"
    SUB_WORD = "sub_word"
    SUB_DWORD = "sub_dword"
    RANDOM_VALUE = "random_value"
    DELETE = "delete"
    CLONE = "clone"
    OVERWRITE = "overwrite"
    EXTRA_OVERWRITE = "extra_overwrite"
    EXTRA_INSERT = "extra_insert"


ALL_OPERATORS = tuple(MutationOperator)

# Arms that need dictionary tokens; masked when the dictionary is empty.
EXTRA_OPERATORS = (MutationOperator.EXTRA_OVERWRITE, MutationOperator.EXTRA_INSERT)

# A havoc child's provenance: the (operator, site) pairs in application order.
MutationRecord = list[tuple[MutationOperator, int]]


class Dictionary:
    """Token list for the Extra* operators. Tokens are non-empty bytes,
    deduplicated, order preserving."""

    def __init__(self, tokens=()):
        self.tokens: list[bytes] = list(dict.fromkeys(bytes(t) for t in tokens if t))

    def __len__(self) -> int:
        return len(self.tokens)

    def __bool__(self) -> bool:
        return bool(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    @classmethod
    def from_file(cls, path) -> "Dictionary":
        """Parse a token file: one token per line, either bare or double
        quoted with \\xNN, \\\\ and \\" escapes; # starts a comment line."""
        tokens = []
        with open(path, "rb") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith(b"#"):
                    continue
                if line.startswith(b'"'):
                    tokens.append(_parse_quoted_token(line, lineno))
                else:
                    if any(c in line for c in (0x20, 0x09)):
                        raise ValueError(
                            f"line {lineno}: bare token contains whitespace, quote it"
                        )
                    tokens.append(line)
        return cls(tokens)


def _parse_quoted_token(line: bytes, lineno: int) -> bytes:
    out = bytearray()
    i = 1
    while i < len(line):
        b = line[i]
        if b == 0x22:  # closing quote
            if line[i + 1 :].strip():
                raise ValueError(f"line {lineno}: trailing junk after closing quote")
            if not out:
                raise ValueError(f"line {lineno}: empty token")
            return bytes(out)
        if b == 0x5C:  # backslash
            esc = line[i + 1 : i + 2]
            if esc == b"\\":
                out += b"\\"
                i += 2
            elif esc == b'"':
                out += b'"'
                i += 2
            elif esc == b"x":
                pair = line[i + 2 : i + 4]
                try:
                    out.append(int(pair, 16))
                except ValueError:
                    raise ValueError(f"line {lineno}: bad \\x escape") from None
                i += 4
            else:
                raise ValueError(f"line {lineno}: unknown escape {esc!r}")
            continue
        out.append(b)
        i += 1
    raise ValueError(f"line {lineno}: unterminated quoted token")


def _flip_bit(data: bytes, site: int, bit: int) -> bytes:
    # bit 0 is the MSB of the byte
    out = bytearray(data)
    out[site] ^= 0x80 >> bit
    return bytes(out)


def _arith(data: bytes, site: int, width: int, delta: int, big: bool) -> bytes:
    endi = "big" if big else "little"
    mask = (1 << (8 * width)) - 1
    val = (int.from_bytes(data[site : site + width], endi) + delta) & mask
    return data[:site] + val.to_bytes(width, endi) + data[site + width :]


def _overwrite_int(data: bytes, site: int, width: int, value: int, big: bool) -> bytes:
    endi = "big" if big else "little"
    raw = value & ((1 << (8 * width)) - 1)
    return data[:site] + raw.to_bytes(width, endi) + data[site + width :]


def _fit_site(rng: random.Random, length: int, site: int, width: int) -> tuple[int, int]:
    """Make a multi-byte site workable: re-draw when the tail is too short,
    drop to byte width when the whole input is."""
    if length >= width:
        if site + width > length:
            site = rng.randrange(length - width + 1)
        return site, width
    return min(site, length - 1), 1


def _block_len(rng: random.Random, limit: int) -> int:
    """Block length for delete/clone/overwrite: strongly favors short
    blocks, occasionally goes long."""
    limit = min(limit, BLOCK_MAX)
    if limit <= 1:
        return limit
    r = rng.random()
    if r < 0.75:
        hi = min(limit, 8)
    elif r < 0.95:
        hi = min(limit, 64)
    else:
        hi = limit
    return rng.randint(1, hi)


def sample_mutation_site(length: int, rng: random.Random, insertion: bool = False) -> int:
    """Uniform site: [0, length) in place, [0, length] for insertions."""
    hi = length + 1 if insertion else length
    if hi < 1:
        raise ValueError("in-place mutation site on empty input")
    return rng.randrange(hi)


def parse_stack_mode(mode: str) -> str:
    """Validate a stack mode string: "uniform" or "fixed:N" with N >= 1."""
    if mode == "uniform":
        return mode
    if mode.startswith("fixed:"):
        n = int(mode[6:])
        if n < 1:
            raise ValueError(f"fixed stack size must be >= 1, got {n}")
        return mode
    raise ValueError(f"unknown stack mode {mode!r}")


def sample_num_mutations(rng: random.Random, mode: str = "uniform") -> int:
    """Havoc stack size for one child."""
    if mode == "uniform":
        return rng.choice(STACK_POWERS)
    if mode.startswith("fixed:"):
        n = int(mode[6:])
        if n < 1:
            raise ValueError(f"fixed stack size must be >= 1, got {n}")
        return n
    raise ValueError(f"unknown stack mode {mode!r}")


def apply_mutation(
    op: MutationOperator,
    data: bytes,
    site: int,
    rng: random.Random,
    dictionary: Dictionary | None = None,
    max_len: int = MAX_INPUT,
) -> bytes:
    """Apply one operator at a pre-drawn site.

    In-place operators preserve length, DELETE shrinks, CLONE/EXTRA_INSERT
    grow (degrading to a no-op rather than exceeding max_len). Word/dword
    operators re-draw the site when the tail is too short and fall back to
    byte width when the whole input is.
    """
    O = MutationOperator
    n = len(data)
    inserting = op is O.CLONE or op is O.EXTRA_INSERT or (op is O.RANDOM_VALUE and n == 0)
    if inserting:
        if not 0 <= site <= n:
            raise ValueError(f"insertion site {site} out of range for length {n}")
    else:
        if n == 0:
            raise ValueError(f"{op.name} needs a non-empty input")
        if not 0 <= site < n:
            raise ValueError(f"site {site} out of range for length {n}")

    if op is O.BIT_FLIP:
        return _flip_bit(data, site, rng.randrange(8))

    if op is O.INTERESTING_BYTE:
        return _overwrite_int(data, site, 1, rng.choice(INTERESTING_8), big=False)

    if op is O.INTERESTING_WORD or op is O.INTERESTING_DWORD:
        width = 2 if op is O.INTERESTING_WORD else 4
        site, width = _fit_site(rng, n, site, width)
        values = {1: INTERESTING_8, 2: INTERESTING_16, 4: INTERESTING_32}[width]
        value = rng.choice(values)
        big = width > 1 and rng.randrange(2) == 1
        return _overwrite_int(data, site, width, value, big)

    if op in (O.ADD_BYTE, O.ADD_WORD, O.ADD_DWORD, O.SUB_BYTE, O.SUB_WORD, O.SUB_DWORD):
        width = {O.ADD_BYTE: 1, O.SUB_BYTE: 1, O.ADD_WORD: 2, O.SUB_WORD: 2,
                 O.ADD_DWORD: 4, O.SUB_DWORD: 4}[op]
        site, width = _fit_site(rng, n, site, width)
        delta = rng.randint(1, ARITH_MAX)
        if op in (O.SUB_BYTE, O.SUB_WORD, O.SUB_DWORD):
            delta = -delta
        big = width > 1 and rng.randrange(2) == 1
        return _arith(data, site, width, delta, big)

    if op is O.RANDOM_VALUE:
        if n == 0:
            return bytes([rng.randrange(256)])
        # XOR with 1..255 guarantees the byte actually changes
        out = bytearray(data)
        out[site] ^= rng.randrange(1, 256)
        return bytes(out)

    if op is O.DELETE:
        length = _block_len(rng, n - site)
        return data[:site] + data[site + length :]

    if op is O.CLONE:
        if n and rng.random() < 0.75:
            length = _block_len(rng, n)
            src = rng.randint(0, n - length)
            chunk = data[src : src + length]
        else:
            length = _block_len(rng, max(n, 1))
            chunk = bytes([rng.randrange(256)]) * length
        child = data[:site] + chunk + data[site:]
        return child if len(child) <= max_len else data

    if op is O.OVERWRITE:
        length = min(_block_len(rng, n), n - site)
        if rng.random() < 0.75:
            src = rng.randint(0, n - length)
            chunk = data[src : src + length]
        else:
            chunk = bytes([rng.randrange(256)]) * length
        return data[:site] + chunk + data[site + length :]

    if op is O.EXTRA_OVERWRITE or op is O.EXTRA_INSERT:
        if not dictionary:
            raise ValueError(f"{op.name} needs a non-empty dictionary")
        token = rng.choice(dictionary.tokens)
        if op is O.EXTRA_INSERT:
            child = data[:site] + token + data[site:]
            return child if len(child) <= max_len else data
        chunk = token[: n - site]
        return data[:site] + chunk + data[site + len(chunk) :]

    raise ValueError(f"unknown operator {op!r}")


def mutate_child(
    parent: bytes,
    stack: int,
    distribution: "OperatorDistribution",
    rng: random.Random,
    dictionary: Dictionary | None = None,
    max_len: int = MAX_INPUT,
) -> tuple[bytes, MutationRecord]:
    """Build one havoc child by stacking `stack` sequential operator draws.

    Returns the child and its mutation record. Draws that cannot act on an
    empty intermediate (everything but CLONE/EXTRA_INSERT/RANDOM_VALUE)
    convert to an insertion so the stack always completes at full length.
    """
    O = MutationOperator
    data = parent
    record: MutationRecord = []
    have_tokens = bool(dictionary)
    for _ in range(stack):
        op = distribution.sample(rng)
        if not data and op not in (O.CLONE, O.EXTRA_INSERT, O.RANDOM_VALUE):
            op = O.EXTRA_INSERT if have_tokens else O.RANDOM_VALUE
        insertion = op is O.CLONE or op is O.EXTRA_INSERT or (op is O.RANDOM_VALUE and not data)
        site = sample_mutation_site(len(data), rng, insertion=insertion)
        data = apply_mutation(op, data, site, rng, dictionary=dictionary, max_len=max_len)
        record.append((op, site))
    return data, record


def deterministic_stage(parent: bytes, dictionary: Dictionary | None = None) -> Iterator[bytes]:
    """Exhaustive first-pass sweep over a queue entry, AFL style.

    Yields, in order: walking bit flips of width 1/2/4, walking byte flips
    of width 1/2/4, arithmetic add/sub of every delta in [1, ARITH_MAX] at
    byte/word/dword offsets, then every interesting value at byte/word/dword
    offsets. Multi-byte steps cover both endiannesses. The dictionary plays
    no part in the sweep; tokens are left to the havoc stage.
    """
    L = len(parent)

    for width in (1, 2, 4):
        for start in range(8 * L - width + 1):
            child = bytearray(parent)
            for b in range(start, start + width):
                child[b >> 3] ^= 0x80 >> (b & 7)
            yield bytes(child)

    for width in (1, 2, 4):
        for pos in range(L - width + 1):
            child = bytearray(parent)
            for i in range(pos, pos + width):
                child[i] ^= 0xFF
            yield bytes(child)

    for width in (1, 2, 4):
        for pos in range(L - width + 1):
            for delta in range(1, ARITH_MAX + 1):
                if width == 1:
                    yield _arith(parent, pos, 1, delta, big=False)
                    yield _arith(parent, pos, 1, -delta, big=False)
                else:
                    for big in (False, True):
                        yield _arith(parent, pos, width, delta, big)
                        yield _arith(parent, pos, width, -delta, big)

    for width, values in ((1, INTERESTING_8), (2, INTERESTING_16), (4, INTERESTING_32)):
        for pos in range(L - width + 1):
            for value in values:
                if width == 1:
                    yield _overwrite_int(parent, pos, 1, value, big=False)
                else:
                    for big in (False, True):
                        yield _overwrite_int(parent, pos, width, value, big)
