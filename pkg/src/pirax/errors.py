"""Exception taxonomy with stable wire codes.

Every error that can cross a process boundary carries a ``code`` string
that is identical on the library surface, in HTTP error bodies, and in
scenario expectations, so callers never have to parse messages.
"""

from __future__ import annotations


class PiraxError(Exception):
    """Base class; ``code`` is the stable machine-readable identifier."""

    code = "PiraxError"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# --- identity ---------------------------------------------------------------


class ImeiMalformed(PiraxError):
    code = "ImeiMalformed"


class ImeiChecksumFailed(PiraxError):
    code = "ImeiChecksumFailed"


class UuidMalformed(PiraxError):
    code = "UuidMalformed"


class UuidNil(PiraxError):
    code = "UuidNil"


# --- serial codec -----------------------------------------------------------


class ArmorMalformed(PiraxError):
    code = "ArmorMalformed"


class SerialMalformed(PiraxError):
    code = "SerialMalformed"


class UnsupportedVersion(PiraxError):
    code = "UnsupportedVersion"


class TokenMacMismatch(PiraxError):
    code = "TokenMacMismatch"


class AppIdMismatch(PiraxError):
    code = "AppIdMismatch"


class LicenseTypeInsufficient(PiraxError):
    code = "LicenseTypeInsufficient"


# --- authority --------------------------------------------------------------


class ValidationError(PiraxError):
    code = "ValidationError"


class EntitlementNotFound(PiraxError):
    code = "EntitlementNotFound"


class DuplicateEntitlement(PiraxError):
    code = "DuplicateEntitlement"


class AlreadyActivatedOnOtherDevice(PiraxError):
    code = "AlreadyActivatedOnOtherDevice"


class UnknownSas(PiraxError):
    code = "UnknownSas"


class CloudAlreadyBound(PiraxError):
    code = "CloudAlreadyBound"


class LedgerCorrupt(PiraxError):
    code = "LedgerCorrupt"

    def __init__(self, message: str = "", line: int | None = None):
        super().__init__(message)
        self.line = line


# --- transport / envelope ---------------------------------------------------


class EnvelopeMalformed(PiraxError):
    code = "EnvelopeMalformed"


class EnvelopeAuthFailed(PiraxError):
    code = "EnvelopeAuthFailed"


class AuthorityUnreachable(PiraxError):
    code = "AuthorityUnreachable"


# --- runtime agents ---------------------------------------------------------


class SasRejectedLocally(PiraxError):
    code = "SasRejectedLocally"


class CasRejectedLocally(PiraxError):
    code = "CasRejectedLocally"


class SasMissingOnClone(PiraxError):
    code = "SasMissingOnClone"


class StateCorrupt(PiraxError):
    code = "StateCorrupt"


# --- scenario harness -------------------------------------------------------


class ScenarioMalformed(PiraxError):
    code = "ScenarioMalformed"


def _register() -> dict[str, type[PiraxError]]:
    table: dict[str, type[PiraxError]] = {}
    stack = [PiraxError]
    while stack:
        cls = stack.pop()
        table[cls.code] = cls
        stack.extend(cls.__subclasses__())
    return table


CODE_TO_ERROR = _register()


def error_for_code(code: str, message: str = "") -> PiraxError:
    """Rehydrate a wire error code into the matching exception type."""
    cls = CODE_TO_ERROR.get(code, PiraxError)
    err = cls(message)
    if cls is PiraxError:
        err.code = code or "PiraxError"
    return err
