"""Deterministic replay of threat-model and legitimate-flow scenarios.

Scenarios are data: a JSON script of steps interpreted against an
in-process authority plus device/clone agents wired over the loopback
client, so new attacks need no code changes. Every source of
randomness comes from one seeded generator and the clock is a counter,
which makes reports byte-identical for a given seed.

The attacker model matches the protocol's trust assumptions: an
attacker may copy state files, move them between identities, and flip
bits, but can never read the key material embedded in the agents.
"""

from __future__ import annotations

import json
import random
import shutil
import tempfile
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .agents import (
    ActivationState,
    clone_activate,
    clone_gate,
    device_first_run,
    device_gate,
    state_load,
)
from .authority import LicenseAuthority
from .client import LoopbackAuthorityClient
from .errors import PiraxError, ScenarioMalformed
from .identity import (
    ApplicationId,
    DeviceIdentity,
    LicenseType,
    VmIdentity,
    random_imei,
    random_vm_uuid,
)
from .ledger import Ledger
from .serials import SAS_LEN, KeyMaterial, armor, dearmor, encode_cars, encode_sars, Sas

_CLOCK_EPOCH = 1_700_000_000


@dataclass(frozen=True)
class Scenario:
    """One replayable script with its expected step-by-step outcomes."""

    name: str
    description: str
    steps: list[dict]
    expected: list[str]

    @classmethod
    def from_json(cls, doc: dict) -> "Scenario":
        try:
            name = doc["name"]
            steps = doc["steps"]
            expected = doc["expected"]
        except (KeyError, TypeError):
            raise ScenarioMalformed("scenario needs 'name', 'steps', and 'expected'") from None
        if not isinstance(steps, list) or not all(isinstance(s, dict) for s in steps):
            raise ScenarioMalformed(f"{name}: steps must be a list of objects")
        if not isinstance(expected, list) or len(expected) != len(steps):
            raise ScenarioMalformed(
                f"{name}: expected must list one outcome per step "
                f"({len(steps)} steps, {len(expected)} outcomes)"
            )
        return cls(name, doc.get("description", ""), steps, [str(e) for e in expected])


@dataclass
class ScenarioReport:
    """Verdict trace of one scenario replay."""

    name: str
    seed: int
    steps: list[dict]
    observed: list[str]
    expected: list[str]
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.observed == self.expected

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "steps": self.steps,
            "observed": self.observed,
            "expected": self.expected,
            "pass": self.passed,
        }


class _Engine:
    """Interprets one scenario; all state lives inside one run."""

    def __init__(self, scenario: Scenario, seed: int, workdir: Path):
        self.scenario = scenario
        self.seed = seed
        self.rng = random.Random(seed)
        self.workdir = workdir
        self.app_id = ApplicationId(self.rng.randbytes(16))
        self.keys = KeyMaterial(self.rng.randbytes(32), self.rng.randbytes(32))
        self._ticks = 0
        self.devices: dict[str, DeviceIdentity] = {}
        self.vms: dict[str, VmIdentity] = {}
        self.purchases: dict[str, bytes] = {}
        self._fresh_authority()

    def _fresh_authority(self) -> None:
        self.authority = LicenseAuthority(
            {self.app_id.hex: self.keys}, Ledger(), clock=self._clock
        )
        self.client = LoopbackAuthorityClient(self.authority)

    def _clock(self) -> int:
        self._ticks += 1
        return _CLOCK_EPOCH + self._ticks

    # -- slot helpers ----------------------------------------------------------

    def _device(self, step: dict) -> DeviceIdentity:
        name = self._arg(step, "device")
        if name not in self.devices:
            raise ScenarioMalformed(f"device {name!r} was never provisioned")
        return self.devices[name]

    def _vm(self, step: dict) -> VmIdentity:
        name = self._arg(step, "vm")
        if name not in self.vms:
            raise ScenarioMalformed(f"vm {name!r} was never provisioned")
        return self.vms[name]

    def _purchase(self, step: dict) -> bytes:
        # Tokens are minted lazily so scripts can reference purchases that
        # were deliberately never registered with the authority.
        name = self._arg(step, "purchase")
        if name not in self.purchases:
            self.purchases[name] = self.rng.randbytes(16)
        return self.purchases[name]

    def _state_path(self, step: dict, key: str = "state") -> Path:
        return self.workdir / f"{self._arg(step, key)}.json"

    def _arg(self, step: dict, key: str) -> str:
        value = step.get(key)
        if not isinstance(value, str) or not value:
            raise ScenarioMalformed(f"step {step.get('op')!r} needs field {key!r}")
        return value

    # -- step ops ----------------------------------------------------------------

    def _op_entitle(self, step: dict) -> str:
        ltype = LicenseType.from_label(self._arg(step, "license_type"))
        self.client.register_entitlement(self.app_id, self._purchase(step), ltype)
        return "ok"

    def _op_new_device(self, step: dict) -> str:
        self.devices[self._arg(step, "device")] = random_imei(self.rng)
        return "ok"

    def _op_new_vm(self, step: dict) -> str:
        self.vms[self._arg(step, "vm")] = random_vm_uuid(self.rng)
        return "ok"

    def _op_device_activate(self, step: dict) -> str:
        device_first_run(
            self._device(step),
            self.app_id,
            self._purchase(step),
            self.client,
            self.keys,
            self._state_path(step),
            rng=self.rng,
            clock=self._clock,
        )
        return "ok"

    def _op_clone_activate(self, step: dict) -> str:
        path = self._state_path(step)
        clone_activate(
            self._vm(step),
            state_load(path, self.app_id),
            self.client,
            self.keys,
            path,
            rng=self.rng,
        )
        return "ok"

    def _op_device_gate(self, step: dict) -> str:
        state = state_load(self._state_path(step), self.app_id)
        return str(device_gate(self._device(step), state, self.keys))

    def _op_clone_gate(self, step: dict) -> str:
        state = state_load(self._state_path(step), self.app_id)
        return str(clone_gate(self._vm(step), state, self.keys))

    def _op_copy_state(self, step: dict) -> str:
        shutil.copyfile(self._state_path(step, "src"), self._state_path(step, "dst"))
        return "ok"

    def _op_vm_restart(self, step: dict) -> str:
        self._vm(step)  # identity is stable across restart; nothing to mutate
        return "ok"

    def _op_tamper(self, step: dict) -> str:
        which = self._arg(step, "field")
        if which not in ("sas", "cas"):
            raise ScenarioMalformed("tamper field must be 'sas' or 'cas'")
        path = self._state_path(step)
        doc = json.loads(path.read_text())
        if not doc.get(which):
            raise ScenarioMalformed(f"state {path.name} has no {which} to tamper with")
        raw = bytearray(dearmor(doc[which]))
        bit = self.rng.randrange(len(raw) * 8)
        raw[bit // 8] ^= 1 << (bit % 8)
        doc[which] = armor(bytes(raw))
        path.write_text(json.dumps(doc))
        return "ok"

    def _op_assert_same_sas(self, step: dict) -> str:
        return self._compare_field(step, "sas")

    def _op_assert_same_cas(self, step: dict) -> str:
        return self._compare_field(step, "cas")

    def _compare_field(self, step: dict, which: str) -> str:
        a = json.loads(self._state_path(step, "a").read_text()).get(which)
        b = json.loads(self._state_path(step, "b").read_text()).get(which)
        return f"same-{which}" if a is not None and a == b else f"different-{which}"

    def _op_forge_random_sas(self, step: dict) -> str:
        """Gate random serial bodies of the real SAS length: none may pass."""
        attempts = int(step.get("attempts", 100))
        dev = self._device(step)
        denied = 0
        for _ in range(attempts):
            state = ActivationState(app_id=self.app_id.hex, sas=armor(self.rng.randbytes(SAS_LEN)))
            if not device_gate(dev, state, self.keys):
                denied += 1
        return f"denied:{denied}/{attempts}"

    def _op_send_tampered_sars(self, step: dict) -> str:
        """A valid request with one MAC bit flipped, straight to the authority."""
        sars = encode_sars(
            self._device(step), self.app_id, self._purchase(step),
            self.rng.randbytes(16), self.keys,
        )
        raw = bytearray(sars.to_bytes())
        bit = self.rng.randrange(32 * 8)
        raw[-32 + bit // 8] ^= 1 << (bit % 8)
        self.client.activate_smartphone(armor(bytes(raw)))
        return "ok"

    def _op_send_tampered_cars(self, step: dict) -> str:
        doc = json.loads(self._state_path(step).read_text())
        sas = Sas.parse(dearmor(doc["sas"]))
        cars = encode_cars(self._vm(step), sas, self.app_id, self.rng.randbytes(16), self.keys)
        raw = bytearray(cars.to_bytes())
        bit = self.rng.randrange(32 * 8)
        raw[-32 + bit // 8] ^= 1 << (bit % 8)
        self.client.activate_cloud(armor(bytes(raw)))
        return "ok"

    def _op_reset_authority(self, step: dict) -> str:
        self._fresh_authority()
        return "ok"

    # -- driver -------------------------------------------------------------------

    def run(self) -> ScenarioReport:
        observed: list[str] = []
        for step in self.scenario.steps:
            op = step.get("op")
            handler = getattr(self, f"_op_{str(op).replace('-', '_')}", None)
            if handler is None:
                raise ScenarioMalformed(f"unknown step op {op!r}")
            try:
                observed.append(handler(step))
            except PiraxError as err:
                if isinstance(err, ScenarioMalformed):
                    raise
                observed.append(f"error:{err.code}")
        return ScenarioReport(
            name=self.scenario.name,
            seed=self.seed,
            steps=self.scenario.steps,
            observed=observed,
            expected=self.scenario.expected,
        )


# --- catalog ---------------------------------------------------------------------

CATALOG_ORDER = [
    "legit-device-and-cloud",
    "reinstall-same-device",
    "vm-restart-migrate",
    "clone-to-foreign-vm",
    "clone-to-same-model-phone",
    "app-extracted-no-license",
    "tampered-serial",
    "smartphone-only-cloud-attempt",
    "second-device-same-purchase",
    "forged-sas-known-imei",
]


def load_builtin(name: str) -> Scenario:
    if name not in CATALOG_ORDER:
        raise ScenarioMalformed(f"no built-in scenario named {name!r}")
    text = resources.files("pirax.scenarios").joinpath(f"{name}.json").read_text()
    return Scenario.from_json(json.loads(text))


def load_scenario_file(path: str | Path) -> Scenario:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ScenarioMalformed(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioMalformed(f"scenario file {path} is not JSON: {exc}") from None
    return Scenario.from_json(doc)


def load_catalog() -> list[Scenario]:
    return [load_builtin(name) for name in CATALOG_ORDER]


def run_scenario(scenario: Scenario, seed: int = 0) -> ScenarioReport:
    with tempfile.TemporaryDirectory(prefix="pirax-sim-") as tmp:
        return _Engine(scenario, seed, Path(tmp)).run()


def run_all(seed: int = 0, scenarios: list[Scenario] | None = None) -> dict:
    reports = [run_scenario(s, seed) for s in (scenarios or load_catalog())]
    passed = sum(1 for r in reports if r.passed)
    return {
        "seed": seed,
        "total": len(reports),
        "passed": passed,
        "failed": len(reports) - passed,
        "reports": [r.to_json() for r in reports],
    }
