"""Application licensing for smartphone + cloud-VM pairs.

A license authority issues activation serials cryptographically bound
to a smartphone's IMEI and a cloud VM's UUID; runtime agents gate every
application execution on both endpoints; a scenario harness replays the
threat model end to end.
"""

from .agents import (
    ActivationState,
    DenyReason,
    GateVerdict,
    clone_activate,
    clone_gate,
    device_first_run,
    device_gate,
    state_load,
    state_store,
)
from .authority import LicenseAuthority
from .client import AuthorityClient, HttpAuthorityClient, LoopbackAuthorityClient
from .errors import PiraxError
from .harness import Scenario, ScenarioReport, load_builtin, load_catalog, run_all, run_scenario
from .identity import (
    ApplicationId,
    DeviceIdentity,
    Entitlement,
    LicenseType,
    VmIdentity,
    luhn_check_digit,
    parse_imei,
    parse_uuid,
)
from .ledger import Ledger, LicenseRecord
from .serials import (
    Cars,
    Cas,
    KeyMaterial,
    Sars,
    Sas,
    ValidationOutcome,
    armor,
    dearmor,
    encode_cars,
    encode_sars,
    issue_cas,
    issue_sas,
    verify_cas,
    verify_sas,
)
from .service import ProviderServer

__version__ = "0.1.0"

__all__ = [
    "ActivationState",
    "ApplicationId",
    "AuthorityClient",
    "Cars",
    "Cas",
    "DenyReason",
    "DeviceIdentity",
    "Entitlement",
    "GateVerdict",
    "HttpAuthorityClient",
    "KeyMaterial",
    "Ledger",
    "LicenseAuthority",
    "LicenseRecord",
    "LicenseType",
    "LoopbackAuthorityClient",
    "PiraxError",
    "ProviderServer",
    "Sars",
    "Sas",
    "Scenario",
    "ScenarioReport",
    "ValidationOutcome",
    "VmIdentity",
    "armor",
    "clone_activate",
    "clone_gate",
    "dearmor",
    "device_first_run",
    "device_gate",
    "encode_cars",
    "encode_sars",
    "issue_cas",
    "issue_sas",
    "load_builtin",
    "load_catalog",
    "luhn_check_digit",
    "parse_imei",
    "parse_uuid",
    "run_all",
    "run_scenario",
    "state_load",
    "state_store",
    "verify_cas",
    "verify_sas",
    "__version__",
]
