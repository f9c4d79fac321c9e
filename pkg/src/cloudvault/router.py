"""The common dispatch API: one entry point, pipeline chosen by policy.

A data object arrives with a secret level and the class of operations its
owner still needs over it. Those two inputs alone pick the pipeline:

* top secret data never leaves the machine, whatever operations are asked;
* unclassified data goes to the single best-ranked provider as-is;
* secret data at rest is entropy-split, every chunk threshold-shared across
  providers, parity-extended, and covered by precomputed audit tokens;
* secret data still needing arithmetic is stored additively encrypted;
* the advanced analytics tier is refused outright rather than weakened.

``route`` is pure and total over all level/operations combinations: it
always returns a decision, possibly an explicit rejection. ``put`` executes
the decision, ``get`` inverts it, ``audit`` runs integrity challenges with
provider attribution. Placement state lands in the manifest, secrets in the
keystore, and nothing recoverable ever sits with a single provider.
"""

from __future__ import annotations

import base64
import enum
import hashlib
import itertools
import json
import math
import random
from dataclasses import dataclass, field as dc_field
from typing import Mapping, Sequence

from . import anonymize, entropy_split, homomorphic, integrity, shamir, simcloud
from .field import BinaryField
from .persistence import KeyStore, ManifestRecord, ManifestStore, NotFound
from .ranking import ProviderProfile, Weights, rank_providers

_FIELD = BinaryField()


class RouterError(Exception):
    pass


class NoProviders(RouterError):
    """Non-local routing with an empty provider set."""


class DuplicateObject(RouterError):
    """The object id is already in the manifest."""


class RouteRejected(RouterError):
    """put() called on an object whose decision is an explicit rejection."""


class PlacementError(RouterError):
    """Share spreading cannot satisfy the no-provider-holds-a-threshold rule."""


class ReconstructionFailed(RouterError):
    """Too few live shares or groups to rebuild the object."""


class IntegrityViolation(RouterError):
    """Reconstructed data does not match its recorded digest."""


class SecretLevel(enum.Enum):
    TOP_SECRET = "top-secret"
    SECRET = "secret"
    UNCLASSIFIED = "unclassified"


class OperationClass(enum.Enum):
    NO_OPERATIONS = "none"
    BASIC_OPERATIONS = "basic"
    ADVANCED_ANALYTICS = "advanced"


class Pipeline(enum.Enum):
    LOCAL_ONLY = "LocalOnly"
    PLAIN_SINGLE_CLOUD = "PlainSingleCloud"
    SPLIT_SHARE_DISPERSE = "SplitShareDisperse"
    HOMOMORPHIC_STORE = "HomomorphicStore"
    REJECTED = "Rejected"


_PROTECTION_RANK = {
    Pipeline.LOCAL_ONLY: 4,
    Pipeline.SPLIT_SHARE_DISPERSE: 3,
    Pipeline.HOMOMORPHIC_STORE: 2,
    Pipeline.PLAIN_SINGLE_CLOUD: 1,
}


def protection_rank(pipeline: Pipeline) -> int:
    """Coarse confidentiality ordering; rejection protects nothing (0)."""
    return _PROTECTION_RANK.get(pipeline, 0)


@dataclass(frozen=True)
class DataObject:
    """What callers hand to the dispatcher.

    ``payload`` is either raw bytes or, for tabular data, a list of
    column-named records with str/int cells; tabular objects must name
    their identifier columns.
    """

    object_id: str
    payload: bytes | list
    secret_level: SecretLevel
    operation_class: OperationClass
    id_columns: tuple[str, ...] = ()

    @property
    def kind(self) -> str:
        return "table" if isinstance(self.payload, list) else "bytes"


@dataclass(frozen=True)
class RoutingDecision:
    pipeline: Pipeline
    reason: str = ""
    threshold: int = 0
    share_count: int = 0
    chunk_count: int = 0
    providers: tuple[str, ...] = ()


@dataclass(frozen=True)
class AuditEntry:
    slot: int
    column: int
    provider: str
    node: str
    round_index: int
    verdict: str  # "intact", "corrupted", "unreachable"


@dataclass(frozen=True)
class AuditReport:
    object_id: str
    pipeline: str
    entries: tuple[AuditEntry, ...]

    @property
    def intact(self) -> bool:
        return all(e.verdict == "intact" for e in self.entries)

    @property
    def corrupted(self) -> list[AuditEntry]:
        return [e for e in self.entries if e.verdict == "corrupted"]


@dataclass
class DispersalPolicy:
    """Tunables for the dispersal pipelines; None means derive a default."""

    threshold: int | None = None
    share_count: int | None = None
    chunk_count: int | None = None
    block_size: int = 4096
    parity: int = 2
    token_rounds: int = 16
    audit_rows: int = 16
    he_bits: int = 256
    weights: Weights = dc_field(default_factory=lambda: Weights(1, 1, 1, 1))
    credential: str = ""

    MAX_DEFAULT_CHUNKS = 8

    def resolve(self, provider_count: int) -> tuple[int, int, int]:
        """(threshold, share_count, chunk_count) for this fleet size."""
        n = self.share_count if self.share_count is not None else provider_count
        k = self.threshold if self.threshold is not None else math.ceil((n + 1) / 2)
        c = (
            self.chunk_count
            if self.chunk_count is not None
            else min(self.MAX_DEFAULT_CHUNKS, provider_count)
        )
        return k, n, c


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _table_bytes(rows: list) -> bytes:
    return json.dumps(rows, sort_keys=True, separators=(",", ":")).encode("utf-8")


class Router:
    """Binds a provider fleet, local stores, profiles and policy together."""

    def __init__(
        self,
        cloud: simcloud.SimCloud,
        manifest: ManifestStore,
        keystore: KeyStore,
        policy: DispersalPolicy,
        profiles: Mapping[str, ProviderProfile] | None = None,
        rng: random.Random | None = None,
    ) -> None:
        self.cloud = cloud
        self.manifest = manifest
        self.keystore = keystore
        self.policy = policy
        self.profiles = dict(profiles or {})
        self.rng = rng if rng is not None else random.Random()

    # -- decision ---------------------------------------------------------

    def ranked_providers(self) -> list[str]:
        """Fleet ordered by weighted score; unprofiled providers rank last."""
        ids = sorted(self.cloud.providers)
        profiled = [self.profiles[p] for p in ids if p in self.profiles]
        ranked = [p.provider_id for p in rank_providers(profiled, self.policy.weights)]
        ranked += [p for p in ids if p not in self.profiles]
        return ranked

    def route(self, obj: DataObject) -> RoutingDecision:
        """Pure decision for any (level, operations) pair.

        Raises:
            NoProviders: remote pipeline with an empty fleet.
            PlacementError: share spreading cannot keep every provider
                below the threshold.
        """
        level, ops = obj.secret_level, obj.operation_class
        if level is SecretLevel.TOP_SECRET:
            return RoutingDecision(pipeline=Pipeline.LOCAL_ONLY)

        providers = self.ranked_providers()
        if not providers:
            raise NoProviders("no storage providers configured")

        if level is SecretLevel.UNCLASSIFIED:
            return RoutingDecision(
                pipeline=Pipeline.PLAIN_SINGLE_CLOUD, providers=(providers[0],)
            )

        # Secret data; the operations tier picks the mechanism.
        if ops is OperationClass.NO_OPERATIONS:
            k, n, c = self.policy.resolve(len(providers))
            if n < 1 or not 1 <= k <= n:
                raise PlacementError(f"unusable scheme parameters k={k}, n={n}")
            per_provider = math.ceil(n / len(providers))
            if per_provider >= max(k, 2):
                raise PlacementError(
                    f"{n} shares over {len(providers)} providers would give one "
                    f"provider {per_provider} shares with threshold {k}"
                )
            return RoutingDecision(
                pipeline=Pipeline.SPLIT_SHARE_DISPERSE,
                threshold=k,
                share_count=n,
                chunk_count=c,
                providers=tuple(providers),
            )
        if ops is OperationClass.BASIC_OPERATIONS:
            if obj.kind == "table":
                return RoutingDecision(
                    pipeline=Pipeline.REJECTED,
                    reason="homomorphic tier stores byte payloads only",
                )
            return RoutingDecision(
                pipeline=Pipeline.HOMOMORPHIC_STORE, providers=(providers[0],)
            )
        return RoutingDecision(
            pipeline=Pipeline.REJECTED,
            reason="advanced analytics tier not implemented",
        )

    # -- put --------------------------------------------------------------

    def put(self, obj: DataObject) -> ManifestRecord:
        """Execute the routed pipeline and commit the placement record.

        Raises:
            DuplicateObject: the id already has a manifest record.
            RouteRejected: routing decided on explicit rejection.
        """
        try:
            self.manifest.lookup(obj.object_id)
        except NotFound:
            pass
        else:
            raise DuplicateObject(f"object {obj.object_id!r} already stored")

        decision = self.route(obj)
        if decision.pipeline is Pipeline.REJECTED:
            raise RouteRejected(decision.reason)

        if decision.pipeline is Pipeline.LOCAL_ONLY:
            record = self._put_local(obj)
        elif decision.pipeline is Pipeline.PLAIN_SINGLE_CLOUD:
            record = self._put_plain(obj, decision)
        elif decision.pipeline is Pipeline.HOMOMORPHIC_STORE:
            record = self._put_homomorphic(obj, decision)
        elif obj.kind == "table":
            record = self._put_anonymized(obj, decision)
        else:
            record = self._put_dispersed(obj, decision)
        return self.manifest.commit(record)

    def _payload_bytes(self, obj: DataObject) -> bytes:
        return _table_bytes(obj.payload) if obj.kind == "table" else obj.payload

    def _record(
        self, obj: DataObject, pipeline: Pipeline, digest: str, details: dict
    ) -> ManifestRecord:
        details = dict(details)
        details["kind"] = obj.kind
        return ManifestRecord(
            object_id=obj.object_id,
            pipeline=pipeline.value,
            secret_level=obj.secret_level.value,
            operation_class=obj.operation_class.value,
            object_digest=digest,
            details=details,
        )

    def _node_for(self, provider_id: str, slot: int) -> str:
        nodes = sorted(self.cloud.provider(provider_id).nodes)
        return nodes[slot % len(nodes)]

    def _put_local(self, obj: DataObject) -> ManifestRecord:
        raw = self._payload_bytes(obj)
        if not raw:
            raise ValueError("refusing to store an empty payload")
        details = {"local_payload": base64.b64encode(raw).decode("ascii")}
        return self._record(obj, Pipeline.LOCAL_ONLY, _sha256(raw), details)

    def _put_plain(self, obj: DataObject, decision: RoutingDecision) -> ManifestRecord:
        raw = self._payload_bytes(obj)
        if not raw:
            raise ValueError("refusing to store an empty payload")
        provider = decision.providers[0]
        node = self._node_for(provider, 0)
        blob_id = f"{obj.object_id}.blob"
        self.cloud.provider(provider).store_blob(
            node, blob_id, raw, credential=self.policy.credential
        )
        details = {"location": {"provider": provider, "node": node, "blob_id": blob_id}}
        return self._record(obj, Pipeline.PLAIN_SINGLE_CLOUD, _sha256(raw), details)

    def _put_homomorphic(self, obj: DataObject, decision: RoutingDecision) -> ManifestRecord:
        raw = self._payload_bytes(obj)
        if not raw:
            raise ValueError("refusing to store an empty payload")
        keypair = homomorphic.keygen(self.policy.he_bits, self.rng)
        blob = bytearray()
        for b in raw:
            ct = homomorphic.encrypt(keypair.public, b, self.rng)
            wire = homomorphic.serialize_ciphertext(ct)
            blob += len(wire).to_bytes(4, "little") + wire
        provider = decision.providers[0]
        node = self._node_for(provider, 0)
        blob_id = f"{obj.object_id}.he"
        self.cloud.provider(provider).store_blob(
            node, blob_id, bytes(blob), credential=self.policy.credential
        )
        key_ref = f"hekey:{obj.object_id}"
        self.keystore.put(
            key_ref,
            "homomorphic-private",
            {
                "p": hex(keypair.p),
                "q": hex(keypair.q),
                "bits": self.policy.he_bits,
                "insecure": keypair.public.insecure,
            },
        )
        details = {
            "location": {"provider": provider, "node": node, "blob_id": blob_id},
            "key_ref": key_ref,
            "count": len(raw),
            "fingerprint": keypair.public.fingerprint,
        }
        return self._record(obj, Pipeline.HOMOMORPHIC_STORE, _sha256(raw), details)

    def _put_dispersed(self, obj: DataObject, decision: RoutingDecision) -> ManifestRecord:
        raw = obj.payload
        if not raw:
            raise ValueError("refusing to store an empty payload")
        k, n = decision.threshold, decision.share_count
        providers = list(decision.providers)
        ring = providers[:]
        self.rng.shuffle(ring)

        # Small payloads cannot honor the configured granularity; shrink the
        # effective block and chunk count rather than refuse the put.
        block = max(1, min(self.policy.block_size, len(raw)))
        chunks_wanted = max(1, decision.chunk_count)
        chunk_count = max(1, min(chunks_wanted, len(raw) // block))
        plan = entropy_split.plan_split(raw, chunk_count, block)
        true_chunks = plan.chunks(raw)
        perm = entropy_split.draw_permutation(self.rng, chunk_count)
        slot_chunks = entropy_split.scatter(true_chunks, perm)

        master_key = self.rng.randbytes(32)
        scheme = shamir.ShareScheme(threshold=k, share_count=n, field=_FIELD)
        slots = []
        token_payloads = []
        for slot, chunk in enumerate(slot_chunks):
            shares = shamir.split(
                chunk, scheme, self.rng, object_id=f"{obj.object_id}/s{slot}"
            )
            enc = integrity.encode(
                b"".join(bytes(s.payload) for s in shares),
                columns=n,
                parity=self.policy.parity,
                master_key=master_key,
                f=_FIELD,
            )
            locations = []
            for i, share in enumerate(shares):
                provider = ring[(slot + i) % len(ring)]
                node = self._node_for(provider, slot)
                blob_id = f"{obj.object_id}.s{slot}.c{i}"
                self.cloud.provider(provider).store_blob(
                    node,
                    blob_id,
                    enc.column_bytes(i),
                    credential=self.policy.credential,
                )
                locations.append(
                    {
                        "provider": provider,
                        "node": node,
                        "blob_id": blob_id,
                        "x": share.x,
                    }
                )
            parity_locations = []
            for j in range(self.policy.parity):
                provider = ring[(slot + n + j) % len(ring)]
                node = self._node_for(provider, slot)
                blob_id = f"{obj.object_id}.s{slot}.p{j}"
                self.cloud.provider(provider).store_blob(
                    node,
                    blob_id,
                    enc.column_bytes(n + j),
                    credential=self.policy.credential,
                )
                parity_locations.append(
                    {"provider": provider, "node": node, "blob_id": blob_id}
                )
            rows = min(self.policy.audit_rows, enc.column_length)
            table = integrity.precompute_tokens(
                enc, self.policy.token_rounds, rows, master_key
            )
            token_payloads.append(integrity.token_table_to_payload(table))
            slots.append(
                {
                    "shares": locations,
                    "parity": parity_locations,
                    "share_bytes": len(chunk),
                }
            )

        integrity_ref = f"itok:{obj.object_id}"
        self.keystore.put(integrity_ref, "integrity-tokens", {"tables": token_payloads})

        details = {
            "scheme": {"threshold": k, "share_count": n},
            "corruption_tolerance": scheme.corruption_tolerance(),
            "chunk_count": chunk_count,
            "cut_points": list(plan.cut_points),
            "split_objective_nats": plan.objective,
            "sequence_permutation": list(perm),
            "chunk_digests": [_sha256(c) for c in true_chunks],
            "slots": slots,
            "integrity_ref": integrity_ref,
            "parity": self.policy.parity,
        }
        return self._record(obj, Pipeline.SPLIT_SHARE_DISPERSE, _sha256(raw), details)

    def _put_anonymized(self, obj: DataObject, decision: RoutingDecision) -> ManifestRecord:
        rows = obj.payload
        if not obj.id_columns:
            raise ValueError("tabular objects must name their identifier columns")
        providers = list(decision.providers)
        payload_cols = [c for c in rows[0].keys() if c not in obj.id_columns]
        if not payload_cols:
            raise ValueError("nothing to disperse: every column is an identifier")
        group_count = min(len(providers), len(payload_cols))
        groups: list[list[str]] = [[] for _ in range(group_count)]
        for i, col in enumerate(payload_cols):
            groups[i % group_count].append(col)

        salt = self.rng.randbytes(32)
        table = anonymize.anonymize_table(rows, obj.id_columns, groups, salt)
        locations = []
        for g in table.groups:
            provider = providers[g.index % len(providers)]
            node = self._node_for(provider, g.index)
            blob_id = f"{obj.object_id}.g{g.index}"
            self.cloud.provider(provider).store_blob(
                node,
                blob_id,
                anonymize.serialize_group(g),
                credential=self.policy.credential,
            )
            locations.append(
                {"provider": provider, "node": node, "blob_id": blob_id, "group": g.index}
            )

        anonymize_ref = f"anon:{obj.object_id}"
        self.keystore.put(
            anonymize_ref,
            "anonymize-mapping",
            {
                "salt": salt.hex(),
                "id_columns": list(table.id_columns),
                "column_order": list(table.column_order),
                "digests": [d.hex() for d in table.digests],
                "mapping": {
                    d.hex(): [["i" if isinstance(v, int) else "s", str(v)] for v in ident]
                    for d, ident in table.local_mapping.items()
                },
            },
        )
        details = {
            "groups": locations,
            "group_columns": [list(g.columns) for g in table.groups],
            "anonymize_ref": anonymize_ref,
        }
        raw = self._payload_bytes(obj)
        return self._record(obj, Pipeline.SPLIT_SHARE_DISPERSE, _sha256(raw), details)

    # -- get ----------------------------------------------------------------

    def get(self, object_id: str) -> bytes | list:
        """Rebuild an object from its manifest record.

        Dispersed reads tolerate up to share_count - threshold shares per
        chunk that are unreachable or silently damaged, in any mix.

        Raises:
            NotFound: unknown object id.
            ReconstructionFailed: too few reachable shares or groups.
            IntegrityViolation: rebuilt data fails every digest check.
        """
        record = self.manifest.lookup(object_id)
        details = record.details
        pipeline = Pipeline(record.pipeline)
        kind = details.get("kind", "bytes")

        if pipeline is Pipeline.LOCAL_ONLY:
            raw = base64.b64decode(details["local_payload"])
            self._check_digest(raw, record.object_digest, "local payload")
            return json.loads(raw.decode("utf-8")) if kind == "table" else raw

        if pipeline is Pipeline.PLAIN_SINGLE_CLOUD:
            raw = self._fetch_or_fail(details["location"])
            self._check_digest(raw, record.object_digest, "stored blob")
            return json.loads(raw.decode("utf-8")) if kind == "table" else raw

        if pipeline is Pipeline.HOMOMORPHIC_STORE:
            return self._get_homomorphic(record)

        if kind == "table":
            return self._get_anonymized(record)
        return self._get_dispersed(record)

    def _check_digest(self, raw: bytes, digest: str, what: str) -> None:
        if _sha256(raw) != digest:
            raise IntegrityViolation(f"{what} does not match its recorded digest")

    def _fetch_or_fail(self, location: dict) -> bytes:
        try:
            return self.cloud.provider(location["provider"]).fetch_blob(
                location["node"],
                location["blob_id"],
                credential=self.policy.credential,
            )
        except simcloud.SimCloudError as e:
            raise ReconstructionFailed(f"cannot fetch {location['blob_id']}: {e}")

    def _get_homomorphic(self, record: ManifestRecord) -> bytes:
        details = record.details
        blob = self._fetch_or_fail(details["location"])
        key_data = self.keystore.get(details["key_ref"])
        p, q = int(key_data["p"], 16), int(key_data["q"], 16)
        keypair = homomorphic.KeyPair(public=homomorphic.PublicKey(n=p * q), p=p, q=q)
        out = bytearray()
        off = 0
        for _ in range(details["count"]):
            ln = int.from_bytes(blob[off : off + 4], "little")
            off += 4
            ct = homomorphic.parse_ciphertext(blob[off : off + ln], keypair.public)
            off += ln
            out.append(homomorphic.decrypt(keypair, ct))
        raw = bytes(out)
        self._check_digest(raw, record.object_digest, "decrypted payload")
        return raw

    def _get_dispersed(self, record: ManifestRecord) -> bytes:
        details = record.details
        scheme = shamir.ShareScheme(
            threshold=details["scheme"]["threshold"],
            share_count=details["scheme"]["share_count"],
            field=_FIELD,
        )
        perm = details["sequence_permutation"]
        digests = details["chunk_digests"]
        # Slot perm[i] holds original chunk i, so its digest is digests[i].
        slot_digest = {perm[i]: digests[i] for i in range(details["chunk_count"])}

        slot_chunks: list[bytes] = []
        for slot, slot_info in enumerate(details["slots"]):
            shares = []
            for loc in slot_info["shares"]:
                try:
                    payload = self.cloud.provider(loc["provider"]).fetch_blob(
                        loc["node"], loc["blob_id"], credential=self.policy.credential
                    )
                except simcloud.SimCloudError:
                    continue
                shares.append(
                    shamir.Share(
                        x=loc["x"],
                        payload=tuple(payload),
                        scheme=scheme,
                        object_id=f"{record.object_id}/s{slot}",
                    )
                )
            if len(shares) < scheme.threshold:
                raise ReconstructionFailed(
                    f"slot {slot}: {len(shares)} live shares, "
                    f"{scheme.threshold} needed"
                )
            # A provider can answer with damaged bytes rather than an error.
            # The chunk digest tells a clean subset from a poisoned one, so
            # try threshold-sized subsets until one checks out; with at most
            # share_count - threshold corruptions some subset always does.
            chunk = None
            for combo in itertools.combinations(shares, scheme.threshold):
                candidate = shamir.reconstruct(combo)
                if _sha256(candidate) == slot_digest[slot]:
                    chunk = candidate
                    break
            if chunk is None:
                raise IntegrityViolation(
                    f"slot {slot}: no reconstruction matches its recorded digest"
                )
            slot_chunks.append(chunk)

        raw = b"".join(slot_chunks[perm[i]] for i in range(details["chunk_count"]))
        self._check_digest(raw, record.object_digest, "reassembled object")
        return raw

    def _get_anonymized(self, record: ManifestRecord) -> list:
        details = record.details
        key_data = self.keystore.get(details["anonymize_ref"])
        fetched: dict[int, anonymize.GroupData] = {}
        for loc in details["groups"]:
            blob = self._fetch_or_fail(loc)
            fetched[loc["group"]] = anonymize.parse_group(blob)

        mapping = {
            bytes.fromhex(d): tuple(int(v) if kind == "i" else v for kind, v in ident)
            for d, ident in key_data["mapping"].items()
        }
        table = anonymize.AnonymizedTable(
            digests=tuple(bytes.fromhex(d) for d in key_data["digests"]),
            groups=tuple(
                anonymize.GroupData(
                    index=loc["group"],
                    columns=tuple(details["group_columns"][loc["group"]]),
                    digests=(),
                    rows=(),
                )
                for loc in details["groups"]
            ),
            id_columns=tuple(key_data["id_columns"]),
            column_order=tuple(key_data["column_order"]),
            local_mapping=mapping,
        )
        rows = anonymize.rejoin(table, fetched)
        self._check_digest(_table_bytes(rows), record.object_digest, "rejoined table")
        return rows

    # -- audit --------------------------------------------------------------

    def audit(self, object_id: str, rounds: int = 1) -> AuditReport:
        """Challenge the stored columns and attribute any mismatch.

        For dispersed objects this runs ``rounds`` fresh token rounds per
        stored column through the holders' challenge endpoints; consumed
        round state is persisted back to the keystore. Pipelines without
        token state fall back to a fetch-and-digest check.

        Raises:
            NotFound: unknown object id.
            integrity.RoundExhausted: a column has no unused rounds left.
        """
        record = self.manifest.lookup(object_id)
        details = record.details
        pipeline = Pipeline(record.pipeline)

        if pipeline is Pipeline.SPLIT_SHARE_DISPERSE and "integrity_ref" in details:
            return self._audit_dispersed(record, rounds)

        entries = []
        locations = []
        if "location" in details:
            locations = [details["location"]]
        elif "groups" in details:
            locations = details["groups"]
        for loc in locations:
            try:
                self.cloud.provider(loc["provider"]).fetch_blob(
                    loc["node"], loc["blob_id"], credential=self.policy.credential
                )
                verdict = "intact"
            except simcloud.SimCloudError:
                verdict = "unreachable"
            entries.append(
                AuditEntry(
                    slot=loc.get("group", 0),
                    column=0,
                    provider=loc["provider"],
                    node=loc["node"],
                    round_index=0,
                    verdict=verdict,
                )
            )
        return AuditReport(
            object_id=object_id, pipeline=record.pipeline, entries=tuple(entries)
        )

    def _audit_dispersed(self, record: ManifestRecord, rounds: int) -> AuditReport:
        details = record.details
        ref = details["integrity_ref"]
        stored = self.keystore.get(ref)
        tables = [integrity.token_table_from_payload(p) for p in stored["tables"]]
        entries = []
        for slot, slot_info in enumerate(details["slots"]):
            table = tables[slot]
            locations = slot_info["shares"] + slot_info["parity"]
            for column, loc in enumerate(locations):
                for _ in range(rounds):
                    round_index = table.next_round(column)
                    msg = integrity.challenge(table, round_index, column)
                    wire = integrity.serialize_challenge(msg)
                    try:
                        reply = self.cloud.provider(loc["provider"]).respond_challenge(
                            loc["node"],
                            loc["blob_id"],
                            wire,
                            credential=self.policy.credential,
                        )
                    except simcloud.SimCloudError:
                        # The round is spent either way; record the outage.
                        integrity.verify(table, round_index, column, -1)
                        entries.append(
                            AuditEntry(
                                slot=slot,
                                column=column,
                                provider=loc["provider"],
                                node=loc["node"],
                                round_index=round_index,
                                verdict="unreachable",
                            )
                        )
                        continue
                    value = integrity.parse_response(reply, table.field)
                    result = integrity.verify(table, round_index, column, value)
                    entries.append(
                        AuditEntry(
                            slot=slot,
                            column=column,
                            provider=loc["provider"],
                            node=loc["node"],
                            round_index=round_index,
                            verdict="intact" if result.intact else "corrupted",
                        )
                    )
        self.keystore.put(
            ref,
            "integrity-tokens",
            {"tables": [integrity.token_table_to_payload(t) for t in tables]},
        )
        return AuditReport(
            object_id=record.object_id, pipeline=record.pipeline, entries=tuple(entries)
        )
