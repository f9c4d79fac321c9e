"""Remote-integrity auditing with precomputed tokens over coded columns.

A payload is reshaped column-major into ``columns`` equal-length vectors of
field elements and extended with ``parity`` redundancy columns through a
Vandermonde generator, so up to ``parity`` lost columns are recoverable from
the rest. Parity columns are blinded with a keyed element stream before they
leave the machine; without the master key they are indistinguishable from
noise, while the additive blinding keeps single-column delta updates cheap.

Verification never ships the file anywhere. For each audit round a keyed
generator derives a handful of row indices and nonzero coefficients; the
expected linear combination of every column's sampled rows is computed once,
up front, and only those tokens are kept (column_count * rounds of them).
Later the row indices and coefficients are sent to the holder of a column,
which answers with the combination over whatever bytes it actually stores.
A mismatch pins the corruption to that column. Sampling ``sample_size`` of
``column_length`` rows detects a single corrupted block with probability
exactly sample_size / column_length per round; sampling every row makes the
check deterministic.

Derivation schedule (fixed; the cross-check oracle in the tests walks the
same steps independently):

* keys longer than 64 bytes are first replaced by their BLAKE2b-512 digest;
* stream block i for context label L = BLAKE2b-256(key=key, data=L || u64le(i)),
  blocks concatenated on demand;
* uniform draws take u32le words from the stream, rejection-sampled to the
  bound;
* parity blinding of column j walks label b"parity-blind" || u32le(j) under
  the master key, one element per row;
* the seed of audit round i is BLAKE2b-256(key=master_key,
  data=b"round-seed" || u64le(i)); the round's stream uses label
  b"challenge" under that seed and draws the distinct row indices first
  (duplicates skipped, result sorted ascending), then one nonzero
  coefficient per row in row order.
"""

from __future__ import annotations

import hashlib
import itertools
import struct
from dataclasses import dataclass, field as dc_field
from typing import Mapping, Sequence

from .field import (
    BinaryField,
    FieldSpec,
    decode_elements,
    encode_elements,
    field_tag,
    primitive_element,
    read_field_tag,
)

CHALLENGE_MAGIC = b"CIT1"


class IntegrityError(Exception):
    pass


class InvalidShape(IntegrityError):
    """Column geometry is impossible for the payload or the field."""


class InvalidChallenge(IntegrityError):
    """Sample size or round count outside the valid range."""


class RoundExhausted(IntegrityError):
    """The (round, column) pair was already challenged; rounds are one-shot."""


class OutOfRange(IntegrityError):
    """Round, column or row index outside the table or column."""


class NoSuchChallenge(IntegrityError):
    """verify() called for a pair that was never issued (or already settled)."""


class RecoveryFailed(IntegrityError):
    """Too many erasures, or no solvable parity subset."""


def _stream_key(key: bytes) -> bytes:
    return key if len(key) <= 64 else hashlib.blake2b(key).digest()


class KeyedStream:
    """Deterministic byte stream: BLAKE2b-256(key, label || u64le(counter))."""

    def __init__(self, key: bytes, label: bytes) -> None:
        self._key = _stream_key(key)
        self._label = label
        self._counter = 0
        self._buf = b""

    def take(self, n: int) -> bytes:
        while len(self._buf) < n:
            block = hashlib.blake2b(
                self._label + struct.pack("<Q", self._counter),
                key=self._key,
                digest_size=32,
            ).digest()
            self._counter += 1
            self._buf += block
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def uniform(self, bound: int) -> int:
        if bound < 1:
            raise ValueError("bound must be positive")
        limit = (1 << 32) - ((1 << 32) % bound)
        while True:
            (v,) = struct.unpack("<I", self.take(4))
            if v < limit:
                return v % bound

    def element(self, f: FieldSpec) -> int:
        return self.uniform(f.order)

    def nonzero_element(self, f: FieldSpec) -> int:
        return 1 + self.uniform(f.order - 1)

    def distinct_indices(self, count: int, bound: int) -> tuple[int, ...]:
        if count > bound:
            raise ValueError("cannot draw more distinct indices than the bound")
        seen: set[int] = set()
        while len(seen) < count:
            seen.add(self.uniform(bound))
        return tuple(sorted(seen))


@dataclass(frozen=True)
class EncodedFile:
    """Stored column view: raw data columns plus blinded parity columns."""

    data_columns: tuple[tuple[int, ...], ...]
    parity_columns: tuple[tuple[int, ...], ...]
    generator: tuple[tuple[int, ...], ...]
    field: FieldSpec
    column_length: int
    padding: int

    @property
    def column_count(self) -> int:
        return len(self.data_columns) + len(self.parity_columns)

    def stored_columns(self) -> tuple[tuple[int, ...], ...]:
        """All columns in provider order: data first, then blinded parity."""
        return self.data_columns + self.parity_columns

    def column_bytes(self, index: int) -> bytes:
        """Wire form of one stored column (what a provider holds)."""
        return encode_elements(self.stored_columns()[index], self.field)


def generator_matrix(f: FieldSpec, columns: int, parity: int) -> tuple[tuple[int, ...], ...]:
    """Vandermonde parity generator: entry [i][j] = g^(i*j), g primitive.

    Column j evaluates the data row polynomial at the point g^j; with a
    primitive g the points are distinct, which is what makes one or two
    erasures always solvable.
    """
    g = primitive_element(f)
    points = [f.pow(g, j) for j in range(parity)]
    return tuple(tuple(f.pow(x, i) for x in points) for i in range(columns))


def _blinding_column(master_key: bytes, j: int, rows: int, f: FieldSpec) -> list[int]:
    stream = KeyedStream(master_key, b"parity-blind" + struct.pack("<I", j))
    return [stream.element(f) for _ in range(rows)]


def encode(
    payload: bytes,
    columns: int,
    parity: int,
    master_key: bytes,
    f: FieldSpec = BinaryField(),
) -> EncodedFile:
    """Reshape ``payload`` into coded columns ready for dispersal.

    The payload is zero-padded to a multiple of ``columns`` elements and
    filled column-major: the first column_length elements are column 0 and
    so on. Parity column j is the generator combination of the data columns,
    then blinded row-wise with the keyed stream.

    Raises:
        InvalidShape: empty payload, columns < 1, parity < 0, more total
            columns than the field has distinct nonzero points, or a payload
            byte outside a prime field's range.
    """
    if not payload:
        raise InvalidShape("empty payload")
    if columns < 1:
        raise InvalidShape("need at least one data column")
    if parity < 0:
        raise InvalidShape("negative parity count")
    if columns + parity > f.order - 1:
        raise InvalidShape(
            f"{columns}+{parity} columns exceed field capacity {f.order - 1}"
        )
    elements = list(payload)
    if f.order < 256:
        for e in elements:
            if e >= f.order:
                raise InvalidShape(f"payload byte {e} outside GF({f.order})")
    col_len = -(-len(elements) // columns)
    padding = columns * col_len - len(elements)
    elements.extend([0] * padding)
    data = tuple(
        tuple(elements[i * col_len : (i + 1) * col_len]) for i in range(columns)
    )
    gen = generator_matrix(f, columns, parity)
    parity_cols = []
    for j in range(parity):
        raw = [0] * col_len
        for i in range(columns):
            gij = gen[i][j]
            col = data[i]
            for r in range(col_len):
                raw[r] = f.add(raw[r], f.mul(gij, col[r]))
        blind = _blinding_column(master_key, j, col_len, f)
        parity_cols.append(tuple(f.add(raw[r], blind[r]) for r in range(col_len)))
    return EncodedFile(
        data_columns=data,
        parity_columns=tuple(parity_cols),
        generator=gen,
        field=f,
        column_length=col_len,
        padding=padding,
    )


def decode(enc: EncodedFile) -> bytes:
    """Flatten the data columns and strip the padding.

    Data elements came from payload bytes, so they are byte values in any
    supported field and the original payload comes back exactly.
    """
    flat: list[int] = []
    for col in enc.data_columns:
        flat.extend(col)
    if enc.padding:
        flat = flat[: -enc.padding]
    return bytes(flat)


def unblind_parity(enc: EncodedFile, master_key: bytes) -> tuple[tuple[int, ...], ...]:
    """Remove the keyed blinding; the result satisfies the parity relation."""
    f = enc.field
    out = []
    for j, col in enumerate(enc.parity_columns):
        blind = _blinding_column(master_key, j, enc.column_length, f)
        out.append(tuple(f.sub(v, b) for v, b in zip(col, blind)))
    return tuple(out)


def update_column(
    enc: EncodedFile, index: int, new_column: Sequence[int]
) -> EncodedFile:
    """Replace one data column, adjusting parity by the delta only.

    Blinding is additive, so the stored (blinded) parity shifts by exactly
    delta * generator and no key is needed. Existing audit tokens refer to
    the old content and must be re-precomputed by the caller.
    """
    if not 0 <= index < len(enc.data_columns):
        raise OutOfRange(f"no data column {index}")
    if len(new_column) != enc.column_length:
        raise InvalidShape("replacement column has the wrong length")
    f = enc.field
    for v in new_column:
        f.check(v)
    old = enc.data_columns[index]
    delta = [f.sub(n, o) for n, o in zip(new_column, old)]
    new_parity = []
    for j, col in enumerate(enc.parity_columns):
        gij = enc.generator[index][j]
        new_parity.append(
            tuple(f.add(col[r], f.mul(gij, delta[r])) for r in range(enc.column_length))
        )
    data = list(enc.data_columns)
    data[index] = tuple(new_column)
    return EncodedFile(
        data_columns=tuple(data),
        parity_columns=tuple(new_parity),
        generator=enc.generator,
        field=enc.field,
        column_length=enc.column_length,
        padding=enc.padding,
    )


def _invert_matrix(mat: list[list[int]], f: FieldSpec) -> list[list[int]] | None:
    n = len(mat)
    aug = [list(row) + [1 if i == j else 0 for j in range(n)] for i, row in enumerate(mat)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if pivot is None:
            return None
        aug[col], aug[pivot] = aug[pivot], aug[col]
        pinv = f.inv(aug[col][col])
        aug[col] = [f.mul(v, pinv) for v in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [f.sub(v, f.mul(factor, p)) for v, p in zip(aug[r], aug[col])]
    return [row[n:] for row in aug]


def recover_columns(
    present: Mapping[int, Sequence[int]],
    columns: int,
    parity: int,
    column_length: int,
    master_key: bytes,
    f: FieldSpec = BinaryField(),
) -> list[tuple[int, ...]]:
    """Rebuild all data columns from any sufficient surviving subset.

    ``present`` maps global column index (data 0..columns-1, then parity) to
    the stored elements; parity entries are expected in blinded form exactly
    as fetched. Each missing data column consumes one surviving parity
    column; subsets are tried until one yields a solvable system.

    Raises:
        RecoveryFailed: more erasures than surviving parity columns, or no
            parity subset gives an invertible system.
    """
    gen = generator_matrix(f, columns, parity)
    missing = [i for i in range(columns) if i not in present]
    data: dict[int, tuple[int, ...]] = {
        i: tuple(present[i]) for i in range(columns) if i in present
    }
    if not missing:
        return [data[i] for i in range(columns)]

    unblinded: dict[int, tuple[int, ...]] = {}
    for j in range(parity):
        if columns + j in present:
            blind = _blinding_column(master_key, j, column_length, f)
            unblinded[j] = tuple(
                f.sub(v, b) for v, b in zip(present[columns + j], blind)
            )
    if len(unblinded) < len(missing):
        raise RecoveryFailed(
            f"{len(missing)} columns missing, only {len(unblinded)} parity available"
        )

    e = len(missing)
    for subset in itertools.combinations(sorted(unblinded), e):
        mat = [[gen[i][j] for i in missing] for j in subset]
        inv = _invert_matrix(mat, f)
        if inv is None:
            continue
        solved: list[list[int]] = [[0] * column_length for _ in missing]
        for r in range(column_length):
            rhs = []
            for j in subset:
                acc = unblinded[j][r]
                for i, col in data.items():
                    acc = f.sub(acc, f.mul(gen[i][j], col[r]))
                rhs.append(acc)
            for ii in range(e):
                acc = 0
                for jj in range(e):
                    acc = f.add(acc, f.mul(inv[ii][jj], rhs[jj]))
                solved[ii][r] = acc
        for ii, i in enumerate(missing):
            data[i] = tuple(solved[ii])
        return [data[i] for i in range(columns)]
    raise RecoveryFailed("no invertible parity subset for this erasure pattern")


def round_seed(master_key: bytes, round_index: int) -> bytes:
    return hashlib.blake2b(
        b"round-seed" + struct.pack("<Q", round_index),
        key=_stream_key(master_key),
        digest_size=32,
    ).digest()


def derive_challenge(
    master_key: bytes,
    round_index: int,
    column_length: int,
    sample_size: int,
    f: FieldSpec,
) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Row indices and coefficients for one audit round.

    Depends on the master key and round only, never on the column, so one
    derivation covers every column of the round. Rows come out sorted and
    distinct; coefficients are uniform nonzero elements, one per row.
    """
    stream = KeyedStream(round_seed(master_key, round_index), b"challenge")
    rows = stream.distinct_indices(sample_size, column_length)
    coeffs = tuple(stream.nonzero_element(f) for _ in rows)
    return rows, coeffs


def column_token(
    column: Sequence[int],
    rows: Sequence[int],
    coeffs: Sequence[int],
    f: FieldSpec,
) -> int:
    """Linear combination of the sampled rows: the audit's expected answer."""
    acc = 0
    for r, c in zip(rows, coeffs):
        if not 0 <= r < len(column):
            raise OutOfRange(f"row {r} outside column of length {len(column)}")
        acc = f.add(acc, f.mul(c, column[r]))
    return acc


@dataclass
class TokenTable:
    """Local audit state for one encoded file: tokens plus round bookkeeping.

    tokens[column][round] is the expected response. A (round, column) pair
    can be challenged once and verified once; consumption is tracked here
    and must be persisted by the caller between audits.
    """

    tokens: tuple[tuple[int, ...], ...]
    seeds: tuple[str, ...]
    sample_size: int
    rounds: int
    column_length: int
    field: FieldSpec
    master_key: bytes
    issued: set[tuple[int, int]] = dc_field(default_factory=set)
    pending: set[tuple[int, int]] = dc_field(default_factory=set)

    @property
    def column_count(self) -> int:
        return len(self.tokens)

    def next_round(self, column: int) -> int:
        """Smallest round not yet issued for ``column``."""
        if not 0 <= column < self.column_count:
            raise OutOfRange(f"no column {column}")
        for i in range(self.rounds):
            if (i, column) not in self.issued:
                return i
        raise RoundExhausted(f"all {self.rounds} rounds spent for column {column}")


@dataclass(frozen=True)
class ChallengeMessage:
    """What the column holder receives: where to look and how to combine."""

    round_index: int
    column: int
    rows: tuple[int, ...]
    coefficients: tuple[int, ...]
    field: FieldSpec


@dataclass(frozen=True)
class CheckResult:
    intact: bool
    column: int


def precompute_tokens(
    enc: EncodedFile,
    rounds: int,
    sample_size: int,
    master_key: bytes,
) -> TokenTable:
    """Compute every audit token before the columns leave the machine.

    Exactly column_count * rounds tokens are stored; afterwards the file is
    not needed for verification.

    Raises:
        InvalidChallenge: rounds < 1, or sample size outside
            [1, column_length].
    """
    if rounds < 1:
        raise InvalidChallenge("need at least one round")
    if not 1 <= sample_size <= enc.column_length:
        raise InvalidChallenge(
            f"sample size {sample_size} outside [1, {enc.column_length}]"
        )
    stored = enc.stored_columns()
    per_round = []
    seeds = []
    for i in range(rounds):
        rows, coeffs = derive_challenge(
            master_key, i, enc.column_length, sample_size, enc.field
        )
        seeds.append(round_seed(master_key, i).hex())
        per_round.append(
            tuple(column_token(col, rows, coeffs, enc.field) for col in stored)
        )
    tokens = tuple(
        tuple(per_round[i][j] for i in range(rounds)) for j in range(len(stored))
    )
    return TokenTable(
        tokens=tokens,
        seeds=tuple(seeds),
        sample_size=sample_size,
        rounds=rounds,
        column_length=enc.column_length,
        field=enc.field,
        master_key=master_key,
    )


def challenge(table: TokenTable, round_index: int, column: int) -> ChallengeMessage:
    """Issue the one-time challenge for (round, column).

    Raises:
        OutOfRange: unknown round or column.
        RoundExhausted: the pair was already issued.
    """
    if not 0 <= column < table.column_count:
        raise OutOfRange(f"no column {column}")
    if not 0 <= round_index < table.rounds:
        raise OutOfRange(f"no round {round_index}")
    key = (round_index, column)
    if key in table.issued:
        raise RoundExhausted(f"round {round_index} already used for column {column}")
    rows, coeffs = derive_challenge(
        table.master_key, round_index, table.column_length, table.sample_size, table.field
    )
    table.issued.add(key)
    table.pending.add(key)
    return ChallengeMessage(
        round_index=round_index,
        column=column,
        rows=rows,
        coefficients=coeffs,
        field=table.field,
    )


def verify(table: TokenTable, round_index: int, column: int, response: int) -> CheckResult:
    """Settle an issued challenge against the precomputed token.

    Raises:
        NoSuchChallenge: nothing pending for the pair.
    """
    key = (round_index, column)
    if key not in table.pending:
        raise NoSuchChallenge(f"no open challenge for round {round_index}, column {column}")
    table.pending.discard(key)
    expected = table.tokens[column][round_index]
    return CheckResult(intact=(response == expected), column=column)


def respond(stored: bytes, message: ChallengeMessage) -> int:
    """The column holder's side: combine the sampled rows of its own bytes.

    Runs on whatever the holder actually stores, so corruption shows up as
    a token mismatch at verify time.
    """
    elements = decode_elements(stored, message.field)
    return column_token(elements, message.rows, message.coefficients, message.field)


def serialize_challenge(msg: ChallengeMessage) -> bytes:
    """Wire form: "CIT1", field tag, u32 round, u32 column, u32 count,
    count u32le rows, count packed coefficients. Little-endian throughout.

    Carries everything the holder needs and nothing it must not see: no
    master key, no token.
    """
    out = CHALLENGE_MAGIC + field_tag(msg.field)
    out += struct.pack("<III", msg.round_index, msg.column, len(msg.rows))
    out += struct.pack(f"<{len(msg.rows)}I", *msg.rows)
    out += encode_elements(msg.coefficients, msg.field)
    return out


def parse_challenge(data: bytes) -> ChallengeMessage:
    if data[:4] != CHALLENGE_MAGIC:
        raise InvalidChallenge("bad challenge magic")
    f, off = read_field_tag(data, 4)
    round_index, column, count = struct.unpack_from("<III", data, off)
    off += 12
    end_rows = off + 4 * count
    if end_rows > len(data):
        raise InvalidChallenge("truncated row list")
    rows = struct.unpack_from(f"<{count}I", data, off)
    coeffs = decode_elements(data[end_rows:], f)
    if len(coeffs) != count:
        raise InvalidChallenge("coefficient count does not match row count")
    return ChallengeMessage(
        round_index=round_index, column=column, rows=rows, coefficients=coeffs, field=f
    )


def encode_response(value: int, f: FieldSpec) -> bytes:
    return encode_elements([value], f)


def parse_response(data: bytes, f: FieldSpec) -> int:
    values = decode_elements(data, f)
    if len(values) != 1:
        raise InvalidChallenge("response must be a single element")
    return values[0]


def token_table_to_payload(table: TokenTable) -> dict:
    """JSON-safe form for the keystore."""
    return {
        "tokens": [list(col) for col in table.tokens],
        "seeds": list(table.seeds),
        "sample_size": table.sample_size,
        "rounds": table.rounds,
        "column_length": table.column_length,
        "field": field_tag(table.field).hex(),
        "master_key": table.master_key.hex(),
        "issued": sorted(list(p) for p in table.issued),
        "pending": sorted(list(p) for p in table.pending),
    }


def token_table_from_payload(payload: Mapping) -> TokenTable:
    f, _ = read_field_tag(bytes.fromhex(payload["field"]), 0)
    return TokenTable(
        tokens=tuple(tuple(col) for col in payload["tokens"]),
        seeds=tuple(payload["seeds"]),
        sample_size=payload["sample_size"],
        rounds=payload["rounds"],
        column_length=payload["column_length"],
        field=f,
        master_key=bytes.fromhex(payload["master_key"]),
        issued={tuple(p) for p in payload["issued"]},
        pending={tuple(p) for p in payload["pending"]},
    )
