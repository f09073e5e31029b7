"""Binary formats and keyed codec for the four activation serials.

Wire layouts (all integers big-endian, MAC = HMAC-SHA256):

  SARS (97 B)  01 01 | app_id:16 | imei:15 ascii | purchase_token:16 | nonce:16 | mac:32
  SAS  (91 B)  01 02 | app_id:16 | license_type:1 | issued_at:8 | device_binding:32 | mac:32
  CARS (173 B) 01 03 | app_id:16 | uuid:16 | sas:91 | nonce:16 | mac:32
  CAS  (91 B)  01 04 | app_id:16 | license_type:1 | issued_at:8 | vm_binding:32 | mac:32

Two keys realize the two distinct encoding schemes: request serials
(SARS/CARS) authenticate under ``request_key``, activation serials
(SAS/CAS) under ``issue_key``. Activation serials never carry the IMEI
or UUID in the clear; they carry keyed commitments instead:

  device_binding = MAC(issue_key, "SAS-BIND" | app_id | imei | license_type)
  vm_binding     = MAC(issue_key, "CAS-BIND-VM"  | app_id | uuid | license_type)[:16]
               || MAC(issue_key, "CAS-BIND-SAS" | app_id | device_binding | license_type)[:16]

vm_binding is split into two half-width commitments so a failed cloud
validation can attribute the mismatch to the VM identity or to the
smartphone license independently. All MAC and binding comparisons are
constant-time.
"""

from __future__ import annotations

import base64
import hmac
import hashlib
import re
import secrets
from dataclasses import dataclass

from .errors import (
    AppIdMismatch,
    ArmorMalformed,
    LicenseTypeInsufficient,
    SerialMalformed,
    TokenMacMismatch,
    UnsupportedVersion,
    ValidationError,
)
from .identity import (
    APP_ID_LEN,
    ApplicationId,
    DeviceIdentity,
    Entitlement,
    LicenseType,
    VmIdentity,
    parse_imei,
)

VERSION = 0x01
KIND_SARS = 0x01
KIND_SAS = 0x02
KIND_CARS = 0x03
KIND_CAS = 0x04

MAC_LEN = 32
NONCE_LEN = 16
SARS_LEN = 97
SAS_LEN = 91
CARS_LEN = 173
CAS_LEN = 91

_SAS_BIND = b"SAS-BIND"
_CAS_BIND_VM = b"CAS-BIND-VM"
_CAS_BIND_SAS = b"CAS-BIND-SAS"

_ARMOR_RE = re.compile(r"^[A-Za-z0-9_-]*$")


def _mac(key: bytes, message: bytes) -> bytes:
    return hmac.new(key, message, hashlib.sha256).digest()


@dataclass(frozen=True)
class KeyMaterial:
    """Per-application secrets of the embedded encoding module.

    ``request_key`` authenticates activation requests; ``issue_key`` is
    held by the authority and embedded in agents so they can verify the
    serials they are handed.
    """

    request_key: bytes
    issue_key: bytes

    def __post_init__(self):
        if len(self.request_key) != 32 or len(self.issue_key) != 32:
            raise ValidationError("keys must be exactly 32 bytes")
        if self.request_key == self.issue_key:
            raise ValidationError("request and issue keys must differ")

    @classmethod
    def generate(cls) -> "KeyMaterial":
        while True:
            rk, ik = secrets.token_bytes(32), secrets.token_bytes(32)
            if rk != ik:
                return cls(rk, ik)


# --- text armoring ----------------------------------------------------------


def armor(data: bytes) -> str:
    """Unpadded URL-safe base64."""
    return base64.urlsafe_b64encode(data).rstrip(b"=").decode("ascii")


def dearmor(text: str) -> bytes:
    if not isinstance(text, str) or not _ARMOR_RE.match(text):
        raise ArmorMalformed("serial text must use the unpadded URL-safe base64 alphabet")
    if len(text) % 4 == 1:
        raise ArmorMalformed("impossible armored length")
    padded = text + "=" * (-len(text) % 4)
    try:
        return base64.urlsafe_b64decode(padded.encode("ascii"))
    except Exception:
        raise ArmorMalformed("undecodable armored serial") from None


# --- validation outcome -----------------------------------------------------


@dataclass(frozen=True)
class ValidationOutcome:
    """Result of verifying an activation serial against an identity."""

    valid: bool
    license_type: LicenseType | None = None
    reason: str | None = None

    @classmethod
    def ok(cls, license_type: LicenseType) -> "ValidationOutcome":
        return cls(True, license_type, None)

    @classmethod
    def fail(cls, reason: str) -> "ValidationOutcome":
        return cls(False, None, reason)

    def __bool__(self) -> bool:
        return self.valid


# --- serial records ---------------------------------------------------------


@dataclass(frozen=True)
class Sars:
    """Smartphone activation request: commits device, purchase, and app."""

    app_id: ApplicationId
    imei: str
    purchase_token: bytes
    nonce: bytes
    mac: bytes

    def to_bytes(self) -> bytes:
        return self._body() + self.mac

    def _body(self) -> bytes:
        return (
            bytes([VERSION, KIND_SARS])
            + self.app_id.value
            + self.imei.encode("ascii")
            + self.purchase_token
            + self.nonce
        )

    @classmethod
    def parse(cls, raw: bytes) -> "Sars":
        _check_frame(raw, SARS_LEN, KIND_SARS)
        imei = raw[18:33].decode("ascii", errors="replace")
        parse_imei(imei)  # malformed identities never ride inside a serial
        return cls(
            app_id=ApplicationId(raw[2:18]),
            imei=imei,
            purchase_token=raw[33:49],
            nonce=raw[49:65],
            mac=raw[65:],
        )

    def mac_ok(self, keys: KeyMaterial) -> bool:
        return hmac.compare_digest(self.mac, _mac(keys.request_key, self._body()))


@dataclass(frozen=True)
class Sas:
    """Smartphone activation serial: binds one app to one IMEI, IMEI-free."""

    app_id: ApplicationId
    license_type: LicenseType
    issued_at: int
    device_binding: bytes
    mac: bytes

    def to_bytes(self) -> bytes:
        return self._body() + self.mac

    def _body(self) -> bytes:
        return (
            bytes([VERSION, KIND_SAS])
            + self.app_id.value
            + bytes([self.license_type.wire_byte])
            + self.issued_at.to_bytes(8, "big")
            + self.device_binding
        )

    @classmethod
    def parse(cls, raw: bytes) -> "Sas":
        _check_frame(raw, SAS_LEN, KIND_SAS)
        return cls(
            app_id=ApplicationId(raw[2:18]),
            license_type=LicenseType.from_wire(raw[18]),
            issued_at=int.from_bytes(raw[19:27], "big"),
            device_binding=raw[27:59],
            mac=raw[59:],
        )

    def mac_ok(self, keys: KeyMaterial) -> bool:
        return hmac.compare_digest(self.mac, _mac(keys.issue_key, self._body()))


@dataclass(frozen=True)
class Cars:
    """Cloud activation request: commits the VM and the device license."""

    app_id: ApplicationId
    uuid: VmIdentity
    sas: Sas
    nonce: bytes
    mac: bytes

    def to_bytes(self) -> bytes:
        return self._body() + self.mac

    def _body(self) -> bytes:
        return (
            bytes([VERSION, KIND_CARS])
            + self.app_id.value
            + self.uuid.raw
            + self.sas.to_bytes()
            + self.nonce
        )

    @classmethod
    def parse(cls, raw: bytes) -> "Cars":
        _check_frame(raw, CARS_LEN, KIND_CARS)
        return cls(
            app_id=ApplicationId(raw[2:18]),
            uuid=VmIdentity.from_raw(raw[18:34]),
            sas=Sas.parse(raw[34 : 34 + SAS_LEN]),
            nonce=raw[125:141],
            mac=raw[141:],
        )

    def mac_ok(self, keys: KeyMaterial) -> bool:
        return hmac.compare_digest(self.mac, _mac(keys.request_key, self._body()))


@dataclass(frozen=True)
class Cas:
    """Cloud activation serial: binds one app to one VM and one device license."""

    app_id: ApplicationId
    license_type: LicenseType
    issued_at: int
    vm_binding: bytes
    mac: bytes

    def to_bytes(self) -> bytes:
        return self._body() + self.mac

    def _body(self) -> bytes:
        return (
            bytes([VERSION, KIND_CAS])
            + self.app_id.value
            + bytes([self.license_type.wire_byte])
            + self.issued_at.to_bytes(8, "big")
            + self.vm_binding
        )

    @classmethod
    def parse(cls, raw: bytes) -> "Cas":
        _check_frame(raw, CAS_LEN, KIND_CAS)
        return cls(
            app_id=ApplicationId(raw[2:18]),
            license_type=LicenseType.from_wire(raw[18]),
            issued_at=int.from_bytes(raw[19:27], "big"),
            vm_binding=raw[27:59],
            mac=raw[59:],
        )

    def mac_ok(self, keys: KeyMaterial) -> bool:
        return hmac.compare_digest(self.mac, _mac(keys.issue_key, self._body()))


def _check_frame(raw: bytes, expected_len: int, expected_kind: int) -> None:
    if len(raw) != expected_len:
        raise SerialMalformed(f"expected {expected_len} bytes, got {len(raw)}")
    if raw[0] != VERSION:
        raise UnsupportedVersion(f"unsupported serial version 0x{raw[0]:02x}")
    if raw[1] != expected_kind:
        raise SerialMalformed(f"expected kind 0x{expected_kind:02x}, got 0x{raw[1]:02x}")


# --- bindings ---------------------------------------------------------------


def device_binding(keys: KeyMaterial, app_id: ApplicationId, dev: DeviceIdentity,
                   license_type: LicenseType) -> bytes:
    return _mac(
        keys.issue_key,
        _SAS_BIND + app_id.value + dev.imei.encode("ascii") + bytes([license_type.wire_byte]),
    )


def vm_binding(keys: KeyMaterial, app_id: ApplicationId, vm: VmIdentity,
               sas_device_binding: bytes, license_type: LicenseType) -> bytes:
    lt = bytes([license_type.wire_byte])
    vm_half = _mac(keys.issue_key, _CAS_BIND_VM + app_id.value + vm.raw + lt)[:16]
    sas_half = _mac(keys.issue_key, _CAS_BIND_SAS + app_id.value + sas_device_binding + lt)[:16]
    return vm_half + sas_half


# --- generation -------------------------------------------------------------


def encode_sars(dev: DeviceIdentity, app_id: ApplicationId, purchase_token: bytes,
                nonce: bytes, keys: KeyMaterial) -> Sars:
    if len(purchase_token) != 16 or len(nonce) != NONCE_LEN:
        raise ValidationError("purchase token and nonce must be 16 bytes each")
    unsigned = Sars(app_id, dev.imei, purchase_token, nonce, b"")
    return Sars(app_id, dev.imei, purchase_token, nonce,
                _mac(keys.request_key, unsigned._body()))


def issue_sas(sars: Sars, entitlement: Entitlement, now: int, keys: KeyMaterial) -> Sas:
    if not sars.mac_ok(keys):
        raise TokenMacMismatch("activation request failed authentication")
    if sars.app_id != entitlement.app_id:
        raise AppIdMismatch("request and entitlement name different applications")
    binding = device_binding(keys, sars.app_id, parse_imei(sars.imei), entitlement.license_type)
    unsigned = Sas(sars.app_id, entitlement.license_type, now, binding, b"")
    return Sas(sars.app_id, entitlement.license_type, now, binding,
               _mac(keys.issue_key, unsigned._body()))


def encode_cars(vm: VmIdentity, sas: Sas, app_id: ApplicationId, nonce: bytes,
                keys: KeyMaterial) -> Cars:
    if not sas.mac_ok(keys):
        raise TokenMacMismatch("refusing to request cloud activation from an unverified license")
    if len(nonce) != NONCE_LEN:
        raise ValidationError("nonce must be 16 bytes")
    unsigned = Cars(app_id, vm, sas, nonce, b"")
    return Cars(app_id, vm, sas, nonce, _mac(keys.request_key, unsigned._body()))


def issue_cas(cars: Cars, now: int, keys: KeyMaterial) -> Cas:
    if not cars.mac_ok(keys):
        raise TokenMacMismatch("cloud activation request failed authentication")
    if not cars.sas.mac_ok(keys):
        raise TokenMacMismatch("embedded device license failed authentication")
    if cars.sas.license_type is not LicenseType.SMARTPHONE_AND_CLOUD:
        raise LicenseTypeInsufficient(
            "a smartphone-only license does not authorize cloud execution"
        )
    binding = vm_binding(keys, cars.app_id, cars.uuid, cars.sas.device_binding,
                         cars.sas.license_type)
    unsigned = Cas(cars.app_id, cars.sas.license_type, now, binding, b"")
    return Cas(cars.app_id, cars.sas.license_type, now, binding,
               _mac(keys.issue_key, unsigned._body()))


# --- verification -----------------------------------------------------------


def verify_sas(sas: Sas, dev: DeviceIdentity, keys: KeyMaterial) -> ValidationOutcome:
    """Valid iff the serial authenticates and commits to this device."""
    if not sas.mac_ok(keys):
        return ValidationOutcome.fail(TokenMacMismatch.code)
    expected = device_binding(keys, sas.app_id, dev, sas.license_type)
    if not hmac.compare_digest(sas.device_binding, expected):
        return ValidationOutcome.fail("DeviceMismatch")
    return ValidationOutcome.ok(sas.license_type)


def verify_cas(cas: Cas, vm: VmIdentity, sas: Sas, keys: KeyMaterial) -> ValidationOutcome:
    """Valid iff the serial authenticates and commits to this VM and this license."""
    if not cas.mac_ok(keys):
        return ValidationOutcome.fail(TokenMacMismatch.code)
    if not sas.mac_ok(keys) or sas.app_id != cas.app_id \
            or sas.license_type is not cas.license_type:
        return ValidationOutcome.fail("SasMismatch")
    expected = vm_binding(keys, cas.app_id, vm, sas.device_binding, cas.license_type)
    vm_ok = hmac.compare_digest(cas.vm_binding[:16], expected[:16])
    sas_ok = hmac.compare_digest(cas.vm_binding[16:], expected[16:])
    if not vm_ok:
        return ValidationOutcome.fail("VmMismatch")
    if not sas_ok:
        return ValidationOutcome.fail("SasMismatch")
    return ValidationOutcome.ok(cas.license_type)


def verify_sas_bytes(raw: bytes, dev: DeviceIdentity, keys: KeyMaterial) -> ValidationOutcome:
    """Byte-level verification: structural damage is an Invalid outcome, not an error."""
    try:
        sas = Sas.parse(raw)
    except UnsupportedVersion:
        return ValidationOutcome.fail(UnsupportedVersion.code)
    except (SerialMalformed, ValidationError):
        return ValidationOutcome.fail(TokenMacMismatch.code)
    return verify_sas(sas, dev, keys)


def verify_cas_bytes(cas_raw: bytes, vm: VmIdentity, sas_raw: bytes,
                     keys: KeyMaterial) -> ValidationOutcome:
    try:
        cas = Cas.parse(cas_raw)
    except UnsupportedVersion:
        return ValidationOutcome.fail(UnsupportedVersion.code)
    except (SerialMalformed, ValidationError):
        return ValidationOutcome.fail(TokenMacMismatch.code)
    try:
        sas = Sas.parse(sas_raw)
    except (UnsupportedVersion, SerialMalformed, ValidationError):
        return ValidationOutcome.fail("SasMismatch")
    return verify_cas(cas, vm, sas, keys)
