"""The application provider's license authority.

Validates entitlements, issues SAS/CAS, persists every issuance through
the ledger, and honors re-activation by returning stored serials byte
for byte. All mutations are serialized under one lock and responses are
computed from the post-append state, so retries and racing devices can
never mint two bindings for one purchase.
"""

from __future__ import annotations

import threading
import time
from collections.abc import Callable, Mapping

from .errors import (
    AlreadyActivatedOnOtherDevice,
    CloudAlreadyBound,
    DuplicateEntitlement,
    EntitlementNotFound,
    LicenseTypeInsufficient,
    TokenMacMismatch,
    UnknownSas,
    ValidationError,
)
from .identity import ApplicationId, Entitlement, LicenseType
from .ledger import Ledger, LicenseRecord
from .serials import Cars, KeyMaterial, Sars, armor, dearmor, issue_cas, issue_sas


class LicenseAuthority:
    """In-process authority core; the HTTP service is a thin shell over it."""

    def __init__(
        self,
        keys_by_app: Mapping[str, KeyMaterial],
        ledger: Ledger | None = None,
        clock: Callable[[], int] | None = None,
    ):
        self._keys = dict(keys_by_app)
        self.ledger = ledger if ledger is not None else Ledger()
        self._clock = clock or (lambda: int(time.time()))
        self._lock = threading.Lock()

    def _keys_for(self, app_id: ApplicationId) -> KeyMaterial:
        keys = self._keys.get(app_id.hex)
        if keys is None:
            raise ValidationError(f"authority holds no keys for application {app_id.hex}")
        return keys

    # -- entitlements --------------------------------------------------------

    def register_entitlement(
        self, app_id: ApplicationId, purchase_token: bytes, license_type: LicenseType
    ) -> None:
        self._keys_for(app_id)
        ent = Entitlement(app_id, license_type, purchase_token)
        with self._lock:
            if (app_id.hex, purchase_token.hex()) in self.ledger.entitlements:
                raise DuplicateEntitlement(
                    f"purchase {purchase_token.hex()} already registered for {app_id.hex}"
                )
            self.ledger.append_entitlement(ent)

    # -- smartphone activation -----------------------------------------------

    def handle_smartphone_activation(self, sars_armored: str) -> str:
        """Issue (or re-serve) the SAS for a device activation request."""
        sars = Sars.parse(dearmor(sars_armored))
        keys = self._keys_for(sars.app_id)
        if not sars.mac_ok(keys):
            raise TokenMacMismatch("activation request failed authentication")

        key = (sars.app_id.hex, sars.purchase_token.hex())
        with self._lock:
            ent = self.ledger.entitlements.get(key)
            if ent is None:
                raise EntitlementNotFound(f"no entitlement for purchase {key[1]}")
            existing = self.ledger.records.get(key)
            if existing is not None:
                if existing.imei != sars.imei:
                    raise AlreadyActivatedOnOtherDevice(
                        "this purchase is already bound to another smartphone"
                    )
                return existing.sas  # re-installation: stored serial, byte-identical

            now = self._clock()
            sas = issue_sas(sars, ent, now, keys)
            record = LicenseRecord(
                app_id=sars.app_id,
                purchase_token=sars.purchase_token,
                license_type=ent.license_type,
                imei=sars.imei,
                sas=armor(sas.to_bytes()),
                created_at=now,
                updated_at=now,
            )
            self.ledger.append_record(record)
            return record.sas

    # -- cloud activation ------------------------------------------------------

    def handle_cloud_activation(self, cars_armored: str) -> str:
        """Issue (or re-serve) the CAS for a clone activation request."""
        cars = Cars.parse(dearmor(cars_armored))
        keys = self._keys_for(cars.app_id)
        if not cars.mac_ok(keys):
            raise TokenMacMismatch("cloud activation request failed authentication")
        if not cars.sas.mac_ok(keys):
            raise TokenMacMismatch("embedded device license failed authentication")

        sas_armored = armor(cars.sas.to_bytes())
        with self._lock:
            record = self._record_for_sas(cars.app_id, sas_armored)
            if record is None:
                raise UnknownSas("embedded device license was never issued here")
            if record.license_type is not LicenseType.SMARTPHONE_AND_CLOUD:
                raise LicenseTypeInsufficient(
                    "a smartphone-only license does not authorize cloud execution"
                )
            uuid = cars.uuid.uuid
            if record.cas is not None:
                if record.uuid != uuid:
                    raise CloudAlreadyBound("this license is already bound to another VM")
                return record.cas  # VM restart/migration: stored serial

            now = self._clock()
            cas = issue_cas(cars, now, keys)
            updated = record.with_cloud(uuid=uuid, cas=armor(cas.to_bytes()), now=now)
            self.ledger.append_record(updated)
            return updated.cas

    def _record_for_sas(self, app_id: ApplicationId, sas_armored: str) -> LicenseRecord | None:
        for record in self.ledger.records.values():
            if record.app_id == app_id and record.sas == sas_armored:
                return record
        return None
