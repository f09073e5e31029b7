"""Device-side and clone-side runtime agents.

An agent does exactly two things: a one-time activation handshake with
the authority, and a pure execution gate consulted before every run of
the application. Gates never touch the network; they re-verify the
stored serials against the injected identity on every call.
"""

from __future__ import annotations

import json
import os
import random
import secrets
import tempfile
import time
from dataclasses import dataclass, replace
from enum import Enum
from pathlib import Path

from .client import AuthorityClient
from .errors import (
    SasMissingOnClone,
    SasRejectedLocally,
    CasRejectedLocally,
    StateCorrupt,
    ValidationError,
)
from .identity import ApplicationId, DeviceIdentity, VmIdentity
from .serials import (
    KeyMaterial,
    Sas,
    armor,
    dearmor,
    encode_cars,
    encode_sars,
    verify_cas_bytes,
    verify_sas_bytes,
)


class DenyReason(Enum):
    NOT_ACTIVATED = "NotActivated"
    DEVICE_MISMATCH = "DeviceMismatch"
    VM_MISMATCH = "VmMismatch"
    TOKEN_MAC_MISMATCH = "TokenMacMismatch"
    SAS_MISSING_ON_CLONE = "SasMissingOnClone"


@dataclass(frozen=True)
class GateVerdict:
    allowed: bool
    reason: DenyReason | None = None

    @classmethod
    def allow(cls) -> "GateVerdict":
        return cls(True)

    @classmethod
    def deny(cls, reason: DenyReason) -> "GateVerdict":
        return cls(False, reason)

    def __str__(self) -> str:
        return "Allow" if self.allowed else f"Deny({self.reason.value})"

    def __bool__(self) -> bool:
        return self.allowed


@dataclass(frozen=True)
class ActivationState:
    """What an agent persists locally after activation."""

    app_id: str  # hex
    sas: str | None = None  # armored
    cas: str | None = None  # armored
    activated_at: int | None = None

    def __post_init__(self):
        if self.cas is not None and self.sas is None:
            raise ValidationError("cloud serial requires a device serial")

    @classmethod
    def not_activated(cls, app_id: ApplicationId | str) -> "ActivationState":
        return cls(app_id=app_id if isinstance(app_id, str) else app_id.hex)

    def to_json(self) -> dict:
        return {
            "app_id": self.app_id,
            "sas": self.sas,
            "cas": self.cas,
            "activated_at": self.activated_at,
        }


def state_store(path: str | os.PathLike, state: ActivationState) -> None:
    """Atomic replace so a crash can never leave a torn state file."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(state.to_json(), fh, indent=2)
            fh.write("\n")
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise


def state_load(path: str | os.PathLike, app_id: ApplicationId | str | None = None) -> ActivationState:
    """Absent file means not activated; unreadable content is StateCorrupt."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        return ActivationState.not_activated(app_id if app_id is not None else "")
    try:
        doc = json.loads(text)
        return ActivationState(
            app_id=doc["app_id"],
            sas=doc.get("sas"),
            cas=doc.get("cas"),
            activated_at=doc.get("activated_at"),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValidationError) as exc:
        raise StateCorrupt(f"unreadable activation state at {path}: {exc}") from None


def _nonce(rng: random.Random | None) -> bytes:
    return rng.randbytes(16) if rng is not None else secrets.token_bytes(16)


# --- device side --------------------------------------------------------------


def device_first_run(
    dev: DeviceIdentity,
    app_id: ApplicationId,
    purchase_token: bytes,
    client: AuthorityClient,
    keys: KeyMaterial,
    state_path: str | os.PathLike,
    *,
    rng: random.Random | None = None,
    clock=time.time,
) -> ActivationState:
    """First-run activation handshake; all-or-nothing on the state file."""
    if Path(state_path).exists():
        raise ValidationError(f"activation state already present at {state_path}")
    sars = encode_sars(dev, app_id, purchase_token, _nonce(rng), keys)
    sas_armored = client.activate_smartphone(armor(sars.to_bytes()))

    raw = dearmor(sas_armored)
    outcome = verify_sas_bytes(raw, dev, keys)
    if not outcome:
        raise SasRejectedLocally(f"authority serial does not validate here: {outcome.reason}")
    if Sas.parse(raw).app_id != app_id:
        raise SasRejectedLocally("authority serial names a different application")

    state = ActivationState(app_id=app_id.hex, sas=sas_armored, activated_at=int(clock()))
    state_store(state_path, state)
    return state


def device_gate(dev: DeviceIdentity, state: ActivationState, keys: KeyMaterial) -> GateVerdict:
    """Pure execution gate: Allow iff the stored serial validates for this IMEI."""
    if state.sas is None:
        return GateVerdict.deny(DenyReason.NOT_ACTIVATED)
    try:
        raw = dearmor(state.sas)
    except Exception:
        return GateVerdict.deny(DenyReason.TOKEN_MAC_MISMATCH)
    outcome = verify_sas_bytes(raw, dev, keys)
    if outcome:
        return GateVerdict.allow()
    if outcome.reason == "DeviceMismatch":
        return GateVerdict.deny(DenyReason.DEVICE_MISMATCH)
    return GateVerdict.deny(DenyReason.TOKEN_MAC_MISMATCH)


# --- clone side ---------------------------------------------------------------


def clone_activate(
    vm: VmIdentity,
    state: ActivationState,
    client: AuthorityClient,
    keys: KeyMaterial,
    state_path: str | os.PathLike,
    *,
    rng: random.Random | None = None,
) -> ActivationState:
    """Cloud activation from the clone; requires the device serial to be present.

    The clone has no IMEI, so it can only content-check the device serial;
    the issued cloud serial is what ties everything back to the device.
    """
    if state.sas is None:
        raise SasMissingOnClone("no device license in the clone image")
    sas = Sas.parse(dearmor(state.sas))
    cars = encode_cars(vm, sas, sas.app_id, _nonce(rng), keys)
    cas_armored = client.activate_cloud(armor(cars.to_bytes()))

    outcome = verify_cas_bytes(dearmor(cas_armored), vm, dearmor(state.sas), keys)
    if not outcome:
        raise CasRejectedLocally(f"authority serial does not validate here: {outcome.reason}")

    updated = replace(state, cas=cas_armored)
    state_store(state_path, updated)
    return updated


def clone_gate(vm: VmIdentity, state: ActivationState, keys: KeyMaterial) -> GateVerdict:
    """Pure execution gate for the clone: needs both serials, validated together."""
    if state.sas is None:
        return GateVerdict.deny(DenyReason.SAS_MISSING_ON_CLONE)
    if state.cas is None:
        return GateVerdict.deny(DenyReason.NOT_ACTIVATED)
    try:
        cas_raw = dearmor(state.cas)
        sas_raw = dearmor(state.sas)
    except Exception:
        return GateVerdict.deny(DenyReason.TOKEN_MAC_MISMATCH)
    outcome = verify_cas_bytes(cas_raw, vm, sas_raw, keys)
    if outcome:
        return GateVerdict.allow()
    if outcome.reason == "VmMismatch":
        return GateVerdict.deny(DenyReason.VM_MISMATCH)
    return GateVerdict.deny(DenyReason.TOKEN_MAC_MISMATCH)
