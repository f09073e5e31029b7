"""Append-only JSON-lines ledger for the license authority.

Each line is one typed record: an entitlement registration or a full
version of a license record. Replaying the file from empty reproduces
the current state (latest version wins per key); nothing is ever
rewritten in place, so any prefix that ends on a line boundary is a
consistent state.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from pathlib import Path

from .errors import LedgerCorrupt, ValidationError
from .identity import ApplicationId, Entitlement, LicenseType

LedgerKey = tuple[str, str]  # (app_id hex, purchase_token hex)


@dataclass(frozen=True)
class LicenseRecord:
    """The authority's view of one activation.

    The authority is trusted, so it keeps the IMEI in plaintext; the
    serials it hands out never do.
    """

    app_id: ApplicationId
    purchase_token: bytes
    license_type: LicenseType
    imei: str
    sas: str  # armored
    cas: str | None = None  # armored
    uuid: str | None = None
    created_at: int = 0
    updated_at: int = 0

    def __post_init__(self):
        if self.cas is not None:
            if self.license_type is not LicenseType.SMARTPHONE_AND_CLOUD:
                raise ValidationError("cloud serial on a smartphone-only record")
            if self.uuid is None:
                raise ValidationError("cloud serial without a bound VM")

    @property
    def key(self) -> LedgerKey:
        return (self.app_id.hex, self.purchase_token.hex())

    def with_cloud(self, uuid: str, cas: str, now: int) -> "LicenseRecord":
        return replace(self, uuid=uuid, cas=cas, updated_at=now)

    def to_json(self) -> dict:
        return {
            "kind": "license",
            "app_id": self.app_id.hex,
            "purchase_token": self.purchase_token.hex(),
            "license_type": self.license_type.label,
            "imei": self.imei,
            "sas": self.sas,
            "cas": self.cas,
            "uuid": self.uuid,
            "created_at": self.created_at,
            "updated_at": self.updated_at,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "LicenseRecord":
        return cls(
            app_id=ApplicationId.from_hex(doc["app_id"]),
            purchase_token=bytes.fromhex(doc["purchase_token"]),
            license_type=LicenseType.from_label(doc["license_type"]),
            imei=doc["imei"],
            sas=doc["sas"],
            cas=doc.get("cas"),
            uuid=doc.get("uuid"),
            created_at=int(doc["created_at"]),
            updated_at=int(doc["updated_at"]),
        )


def _entitlement_to_json(ent: Entitlement) -> dict:
    return {
        "kind": "entitlement",
        "app_id": ent.app_id.hex,
        "purchase_token": ent.purchase_token.hex(),
        "license_type": ent.license_type.label,
    }


def _entitlement_from_json(doc: dict) -> Entitlement:
    return Entitlement(
        app_id=ApplicationId.from_hex(doc["app_id"]),
        license_type=LicenseType.from_label(doc["license_type"]),
        purchase_token=bytes.fromhex(doc["purchase_token"]),
    )


class Ledger:
    """Replayable store of entitlements and license record versions.

    With ``path=None`` the ledger is memory-only (used by the scenario
    harness); with a path every append is flushed and fsynced before the
    mutation is considered durable.
    """

    def __init__(self, path: str | os.PathLike | None = None):
        self.path = Path(path) if path is not None else None
        self.entitlements: dict[LedgerKey, Entitlement] = {}
        self.records: dict[LedgerKey, LicenseRecord] = {}

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Ledger":
        ledger = cls(path)
        try:
            text = Path(path).read_text(encoding="utf-8")
        except FileNotFoundError:
            return ledger
        *complete, tail = text.split("\n")  # a well-formed file ends with "\n"
        for lineno, line in enumerate(complete, start=1):
            ledger._replay_line(line, lineno)
        if tail:
            raise LedgerCorrupt(
                f"truncated record at line {len(complete) + 1}", line=len(complete) + 1
            )
        return ledger

    def _replay_line(self, line: str, lineno: int) -> None:
        try:
            doc = json.loads(line)
            kind = doc["kind"]
            if kind == "entitlement":
                ent = _entitlement_from_json(doc)
                self.entitlements[(ent.app_id.hex, ent.purchase_token.hex())] = ent
            elif kind == "license":
                rec = LicenseRecord.from_json(doc)
                self.records[rec.key] = rec
            else:
                raise ValueError(f"unknown record kind {kind!r}")
        except (ValueError, KeyError, TypeError, ValidationError) as exc:
            raise LedgerCorrupt(f"line {lineno}: {exc}", line=lineno) from None

    def _append_line(self, doc: dict) -> None:
        if self.path is None:
            return
        data = json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(data)
            fh.flush()
            os.fsync(fh.fileno())

    def append_entitlement(self, ent: Entitlement) -> None:
        self._append_line(_entitlement_to_json(ent))
        self.entitlements[(ent.app_id.hex, ent.purchase_token.hex())] = ent

    def append_record(self, rec: LicenseRecord) -> None:
        self._append_line(rec.to_json())
        self.records[rec.key] = rec
