"""Identifier hashing and vertical table partitioning across providers.

Every row's unique identifiers are collapsed into a salted keyed digest; the
digest travels with the data, the identifiers never do. The remaining
columns are cut vertically into groups, one group per provider, so no single
provider sees both halves of anything interesting. The digest-to-identifier
mapping stays local and is the only way back to the original rows.

Digest collisions and duplicate identifier tuples are both hard failures:
merging distinct people under one digest is the exact harm this layer exists
to prevent, so the table is rejected instead.
"""

from __future__ import annotations

import hashlib
import random
import struct
from dataclasses import dataclass
from typing import Mapping, Sequence

Cell = str | int
Record = dict[str, Cell]

GROUP_MAGIC = b"CAN1"
DEFAULT_DIGEST_SIZE = 16


class AnonymizeError(Exception):
    pass


class DuplicateIdentifier(AnonymizeError):
    """Two rows carry the same identifier tuple."""


class DigestCollision(AnonymizeError):
    """Distinct identifier tuples hashed to the same digest."""


class MissingGroup(AnonymizeError):
    """A group expected by the table was not supplied at rejoin time."""


class UnknownDigest(AnonymizeError):
    """A fetched row's digest has no local identifier mapping."""


@dataclass(frozen=True)
class GroupData:
    """One provider's vertical slice: digests plus its columns' cells."""

    index: int
    columns: tuple[str, ...]
    digests: tuple[bytes, ...]
    rows: tuple[tuple[Cell, ...], ...]


@dataclass(frozen=True)
class AnonymizedTable:
    """The local view: row digests, group slices, and the way back."""

    digests: tuple[bytes, ...]
    groups: tuple[GroupData, ...]
    id_columns: tuple[str, ...]
    column_order: tuple[str, ...]
    local_mapping: dict[bytes, tuple[Cell, ...]]


def _check_cell(value: Cell) -> Cell:
    # bool is an int subclass; rejecting it keeps round trips type-exact.
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise ValueError(f"cell values must be str or int, got {type(value).__name__}")
    return value


def _encode_identifier(values: Sequence[Cell]) -> bytes:
    """Unambiguous tuple encoding: type byte and length prefix per value."""
    out = bytearray()
    for v in values:
        raw = str(v).encode("utf-8")
        out += struct.pack("<BI", 1 if isinstance(v, int) else 0, len(raw))
        out += raw
    return bytes(out)


def row_digest(salt: bytes, values: Sequence[Cell], size: int = DEFAULT_DIGEST_SIZE) -> bytes:
    """Salted keyed digest of an identifier tuple."""
    key = salt if len(salt) <= 64 else hashlib.blake2b(salt).digest()
    return hashlib.blake2b(_encode_identifier(values), key=key, digest_size=size).digest()


def anonymize_table(
    rows: Sequence[Record],
    id_columns: Sequence[str],
    groups: Sequence[Sequence[str]],
    salt: bytes,
    digest_size: int = DEFAULT_DIGEST_SIZE,
    shuffle_rows: bool = False,
) -> AnonymizedTable:
    """Strip identifiers, digest them, and slice the rest into groups.

    ``groups`` must partition the non-identifier columns exactly: every
    column in exactly one group, no identifier column in any. Group row
    order matches the input unless ``shuffle_rows`` asks for a per-group
    salt-keyed shuffle (rejoin realigns by digest either way).

    Raises:
        ValueError: no rows, no identifier columns, a column missing from a
            row, a non-partition grouping, or a bad cell type.
        DuplicateIdentifier: repeated identifier tuple.
        DigestCollision: distinct tuples, same digest.
    """
    if not rows:
        raise ValueError("empty table")
    if not id_columns:
        raise ValueError("need at least one identifier column")
    id_cols = tuple(id_columns)
    column_order = tuple(rows[0].keys())
    expect = set(column_order)
    for i, row in enumerate(rows):
        if set(row.keys()) != expect:
            raise ValueError(f"row {i} has different columns than row 0")
        for v in row.values():
            _check_cell(v)
    for c in id_cols:
        if c not in expect:
            raise ValueError(f"identifier column {c!r} not in the table")

    payload_cols = [c for c in column_order if c not in id_cols]
    claimed: list[str] = [c for g in groups for c in g]
    if sorted(claimed) != sorted(payload_cols):
        raise ValueError(
            "groups must partition the non-identifier columns exactly; "
            f"got {claimed!r}, need {payload_cols!r}"
        )

    digests: list[bytes] = []
    mapping: dict[bytes, tuple[Cell, ...]] = {}
    seen_ids: set[tuple[Cell, ...]] = set()
    for row in rows:
        ident = tuple(row[c] for c in id_cols)
        if ident in seen_ids:
            raise DuplicateIdentifier(f"identifier tuple {ident!r} appears twice")
        seen_ids.add(ident)
        d = row_digest(salt, ident, digest_size)
        if d in mapping:
            raise DigestCollision(
                f"digest collision at size {digest_size}; refusing to merge rows"
            )
        mapping[d] = ident
        digests.append(d)

    group_data = []
    for gi, gcols in enumerate(groups):
        gcols = tuple(gcols)
        order = list(range(len(rows)))
        if shuffle_rows:
            seed = hashlib.blake2b(
                b"group-shuffle" + struct.pack("<I", gi), key=salt[:64], digest_size=8
            ).digest()
            random.Random(int.from_bytes(seed, "little")).shuffle(order)
        group_data.append(
            GroupData(
                index=gi,
                columns=gcols,
                digests=tuple(digests[i] for i in order),
                rows=tuple(tuple(rows[i][c] for c in gcols) for i in order),
            )
        )
    return AnonymizedTable(
        digests=tuple(digests),
        groups=tuple(group_data),
        id_columns=id_cols,
        column_order=column_order,
        local_mapping=mapping,
    )


def rejoin(table: AnonymizedTable, fetched: Mapping[int, GroupData]) -> list[Record]:
    """Reassemble the original records from fetched group slices.

    Rows align by digest, so shuffled groups come back in the right order.
    The output reproduces the input table exactly, identifier columns
    included, in the original column order.

    Raises:
        MissingGroup: a group index the table expects is absent.
        UnknownDigest: a fetched digest with no local mapping.
    """
    per_digest: dict[bytes, dict[str, Cell]] = {d: {} for d in table.digests}
    for expected in table.groups:
        got = fetched.get(expected.index)
        if got is None:
            raise MissingGroup(f"group {expected.index} not supplied")
        for d, cells in zip(got.digests, got.rows):
            if d not in table.local_mapping:
                raise UnknownDigest(f"digest {d.hex()} has no local identity")
            slot = per_digest.get(d)
            if slot is None:
                raise UnknownDigest(f"digest {d.hex()} not part of this table")
            for c, v in zip(got.columns, cells):
                slot[c] = v

    out: list[Record] = []
    for d in table.digests:
        ident = table.local_mapping[d]
        cells = per_digest[d]
        record: Record = {}
        for c in table.column_order:
            if c in table.id_columns:
                record[c] = ident[table.id_columns.index(c)]
            else:
                record[c] = cells[c]
        out.append(record)
    return out


def serialize_group(group: GroupData) -> bytes:
    """Wire form: "CAN1", u16 group index, u16 column count, the column
    names (u16 length prefix each), u32 row count, then per row the digest
    first (u16 length prefix) followed by each cell as type byte (0 str,
    1 int) plus u32 length plus utf-8 text. Little-endian throughout."""
    out = bytearray(GROUP_MAGIC)
    out += struct.pack("<HH", group.index, len(group.columns))
    for c in group.columns:
        raw = c.encode("utf-8")
        out += struct.pack("<H", len(raw)) + raw
    out += struct.pack("<I", len(group.rows))
    for d, cells in zip(group.digests, group.rows):
        out += struct.pack("<H", len(d)) + d
        for v in cells:
            raw = str(v).encode("utf-8")
            out += struct.pack("<BI", 1 if isinstance(v, int) else 0, len(raw)) + raw
    return bytes(out)


def parse_group(data: bytes) -> GroupData:
    """Inverse of ``serialize_group``. Raises ValueError on malformed input."""
    if data[:4] != GROUP_MAGIC:
        raise ValueError("bad group magic")
    index, ncols = struct.unpack_from("<HH", data, 4)
    off = 8
    columns = []
    for _ in range(ncols):
        (ln,) = struct.unpack_from("<H", data, off)
        off += 2
        columns.append(data[off : off + ln].decode("utf-8"))
        off += ln
    (nrows,) = struct.unpack_from("<I", data, off)
    off += 4
    digests = []
    rows = []
    for _ in range(nrows):
        (dlen,) = struct.unpack_from("<H", data, off)
        off += 2
        digests.append(data[off : off + dlen])
        off += dlen
        cells: list[Cell] = []
        for _ in range(ncols):
            kind, ln = struct.unpack_from("<BI", data, off)
            off += 5
            text = data[off : off + ln].decode("utf-8")
            off += ln
            cells.append(int(text) if kind == 1 else text)
        rows.append(tuple(cells))
    if off != len(data):
        raise ValueError("trailing bytes after group payload")
    return GroupData(
        index=index, columns=tuple(columns), digests=tuple(digests), rows=tuple(rows)
    )
