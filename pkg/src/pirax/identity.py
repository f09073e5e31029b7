"""Identity and entitlement types shared by every other module.

A license binds exactly two entities: a smartphone, identified by its
15-digit Luhn-checked IMEI, and a cloud VM instance, identified by its
canonical-form UUID (assumed stable across restart, migration, and
upgrade). Both are injected as configuration; nothing here talks to
hardware or a hypervisor.
"""

from __future__ import annotations

import random
import re
import secrets
from dataclasses import dataclass
from enum import Enum

from .errors import (
    ImeiChecksumFailed,
    ImeiMalformed,
    UuidMalformed,
    UuidNil,
    ValidationError,
)

_IMEI_RE = re.compile(r"^[0-9]{15}$")
_UUID_RE = re.compile(
    r"^[0-9a-fA-F]{8}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{4}-[0-9a-fA-F]{12}$"
)

APP_ID_LEN = 16
PURCHASE_TOKEN_LEN = 16


def luhn_checksum_ok(digits: str) -> bool:
    """Luhn mod-10 over a decimal string, rightmost digit is the check digit."""
    total = 0
    for pos, ch in enumerate(reversed(digits)):
        d = ord(ch) - 48
        if pos & 1:
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return total % 10 == 0


def luhn_check_digit(digits14: str) -> str:
    """Check digit that completes a 14-digit prefix into a valid IMEI."""
    if len(digits14) != 14 or not digits14.isdigit():
        raise ImeiMalformed(f"expected 14 decimal digits, got {digits14!r}")
    total = 0
    for pos, ch in enumerate(reversed(digits14)):
        d = ord(ch) - 48
        if pos & 1 == 0:  # these positions double once the check digit is appended
            d *= 2
            if d > 9:
                d -= 9
        total += d
    return str((10 - total % 10) % 10)


@dataclass(frozen=True)
class DeviceIdentity:
    """A smartphone, named by its IMEI."""

    imei: str

    def __post_init__(self):
        if not _IMEI_RE.match(self.imei):
            raise ImeiMalformed(f"IMEI must be exactly 15 decimal digits, got {self.imei!r}")
        if not luhn_checksum_ok(self.imei):
            raise ImeiChecksumFailed(f"IMEI {self.imei} fails the Luhn check")

    def __str__(self) -> str:
        return self.imei


@dataclass(frozen=True)
class VmIdentity:
    """A cloud VM instance, named by its canonical lowercase UUID."""

    uuid: str

    def __post_init__(self):
        if not _UUID_RE.match(self.uuid):
            raise UuidMalformed(f"not a canonical 8-4-4-4-12 UUID: {self.uuid!r}")
        canonical = self.uuid.lower()
        if canonical != self.uuid:
            object.__setattr__(self, "uuid", canonical)
        if set(canonical) <= {"0", "-"}:
            raise UuidNil("nil UUID cannot identify a VM instance")

    @property
    def raw(self) -> bytes:
        """The 16 raw bytes behind the text form."""
        return bytes.fromhex(self.uuid.replace("-", ""))

    @classmethod
    def from_raw(cls, raw: bytes) -> "VmIdentity":
        if len(raw) != 16:
            raise UuidMalformed(f"expected 16 bytes, got {len(raw)}")
        h = raw.hex()
        return cls(f"{h[:8]}-{h[8:12]}-{h[12:16]}-{h[16:20]}-{h[20:]}")

    def __str__(self) -> str:
        return self.uuid


def parse_imei(text: str) -> DeviceIdentity:
    return DeviceIdentity(text)


def parse_uuid(text: str) -> VmIdentity:
    return VmIdentity(text)


def random_imei(rng: random.Random) -> DeviceIdentity:
    """Luhn-valid IMEI from a seeded generator (scenario provisioning)."""
    prefix = "".join(str(rng.randrange(10)) for _ in range(14))
    return DeviceIdentity(prefix + luhn_check_digit(prefix))


def random_vm_uuid(rng: random.Random) -> VmIdentity:
    """Version-4-shaped UUID from a seeded generator (scenario provisioning)."""
    raw = bytearray(rng.randbytes(16))
    raw[6] = (raw[6] & 0x0F) | 0x40
    raw[8] = (raw[8] & 0x3F) | 0x80
    return VmIdentity.from_raw(bytes(raw))


class LicenseType(Enum):
    """What a purchase entitles: device-only execution, or device plus cloud."""

    SMARTPHONE_ONLY = 0x01
    SMARTPHONE_AND_CLOUD = 0x02

    @property
    def wire_byte(self) -> int:
        return self.value

    @property
    def label(self) -> str:
        return "smartphone_only" if self is LicenseType.SMARTPHONE_ONLY else "smartphone_and_cloud"

    @classmethod
    def from_wire(cls, byte: int) -> "LicenseType":
        for member in cls:
            if member.value == byte:
                return member
        raise ValidationError(f"unknown license type byte 0x{byte:02x}")

    @classmethod
    def from_label(cls, label: str) -> "LicenseType":
        for member in cls:
            if member.label == label:
                return member
        raise ValidationError(f"unknown license type {label!r}")


@dataclass(frozen=True)
class ApplicationId:
    """Opaque 16-byte product identifier, hex on the wire."""

    value: bytes

    def __post_init__(self):
        if len(self.value) != APP_ID_LEN:
            raise ValidationError(f"app id must be {APP_ID_LEN} bytes, got {len(self.value)}")

    @classmethod
    def from_hex(cls, text: str) -> "ApplicationId":
        try:
            raw = bytes.fromhex(text)
        except ValueError:
            raise ValidationError(f"app id is not hex: {text!r}") from None
        return cls(raw)

    @classmethod
    def generate(cls) -> "ApplicationId":
        return cls(secrets.token_bytes(APP_ID_LEN))

    @property
    def hex(self) -> str:
        return self.value.hex()

    def __str__(self) -> str:
        return self.hex


@dataclass(frozen=True)
class Entitlement:
    """One purchase of one application; authorizes at most one device binding."""

    app_id: ApplicationId
    license_type: LicenseType
    purchase_token: bytes

    def __post_init__(self):
        if len(self.purchase_token) != PURCHASE_TOKEN_LEN:
            raise ValidationError(
                f"purchase token must be {PURCHASE_TOKEN_LEN} bytes, "
                f"got {len(self.purchase_token)}"
            )
