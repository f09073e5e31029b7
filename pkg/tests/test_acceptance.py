"""Acceptance suite: one test per criterion, one printed verdict line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines alongside pytest's own verdicts.
"""

import contextlib
import itertools
import json
import random
import secrets
import threading
import time
from pathlib import Path

import pytest
import requests

from pirax import envelope
from pirax.authority import LicenseAuthority
from pirax.agents import clone_activate, clone_gate, device_first_run, device_gate, state_store
from pirax.client import HttpAuthorityClient
from pirax.errors import AlreadyActivatedOnOtherDevice, LicenseTypeInsufficient
from pirax.harness import run_all
from pirax.identity import (
    ApplicationId,
    Entitlement,
    LicenseType,
    parse_imei,
    parse_uuid,
    random_imei,
    random_vm_uuid,
)
from pirax.ledger import Ledger
from pirax.serials import (
    KeyMaterial,
    armor,
    dearmor,
    encode_cars,
    encode_sars,
    issue_cas,
    issue_sas,
    verify_cas_bytes,
    verify_sas_bytes,
)
from pirax.service import ProviderServer

from reference_oracle import build_golden_vectors

VECTORS = json.loads((Path(__file__).parent.parent / "vectors" / "serials.json").read_text())
INS = VECTORS["inputs"]
KEYS = KeyMaterial(bytes.fromhex(INS["request_key"]), bytes.fromhex(INS["issue_key"]))
APP = ApplicationId.from_hex(INS["app_id"])
DEV = parse_imei(INS["imei"])
VM = parse_uuid(INS["uuid"])
PURCHASE = bytes.fromhex(INS["purchase_token"])
NONCE = bytes.fromhex(INS["nonce"])
ENT = Entitlement(APP, LicenseType.SMARTPHONE_AND_CLOUD, PURCHASE)


@contextlib.contextmanager
def criterion(number: int, name: str):
    try:
        yield
    except BaseException:
        print(f"[acceptance] criterion {number} ({name}): FAIL")
        raise
    print(f"[acceptance] criterion {number} ({name}): PASS")


def _golden_serials():
    sars = encode_sars(DEV, APP, PURCHASE, NONCE, KEYS)
    sas = issue_sas(sars, ENT, INS["issued_at"], KEYS)
    cars = encode_cars(VM, sas, APP, NONCE, KEYS)
    cas = issue_cas(cars, INS["issued_at"], KEYS)
    return sars, sas, cars, cas


def test_c1_scenario_matrix_three_seeds_under_10s():
    with criterion(1, "scenario matrix, 3 seeds"):
        started = time.monotonic()
        for seed in (1, 2, 3):
            summary = run_all(seed=seed)
            assert summary["passed"] == summary["total"] == 10, (
                seed,
                [r["name"] for r in summary["reports"] if not r["pass"]],
            )
        elapsed = time.monotonic() - started
        assert elapsed < 10.0, f"scenario matrix took {elapsed:.1f}s"


def test_c2_codec_matches_independent_oracle():
    with criterion(2, "golden vectors == independent oracle"):
        assert build_golden_vectors() == VECTORS  # oracle reproduces the frozen file
        sars, sas, cars, cas = _golden_serials()
        for name, serial in (("sars", sars), ("sas", sas), ("cars", cars), ("cas", cas)):
            assert serial.to_bytes().hex() == VECTORS[name]["bytes"], name
            assert serial.to_bytes()[-32:].hex() == VECTORS[name]["mac"], name
            assert armor(serial.to_bytes()) == VECTORS[name]["armored"], name
        assert sas.device_binding.hex() == VECTORS["sas"]["device_binding"]
        assert cas.vm_binding.hex() == VECTORS["cas"]["vm_binding"]


def test_c3_tamper_totality_exhaustive_bit_flips():
    with criterion(3, "tamper totality, exhaustive"):
        _, sas, _, cas = _golden_serials()
        sas_raw, cas_raw = sas.to_bytes(), cas.to_bytes()
        false_accepts = 0
        for bit in range(len(sas_raw) * 8):
            mutated = bytearray(sas_raw)
            mutated[bit // 8] ^= 1 << (bit % 8)
            if verify_sas_bytes(bytes(mutated), DEV, KEYS).valid:
                false_accepts += 1
        for bit in range(len(cas_raw) * 8):
            mutated = bytearray(cas_raw)
            mutated[bit // 8] ^= 1 << (bit % 8)
            if verify_cas_bytes(bytes(mutated), VM, sas_raw, KEYS).valid:
                false_accepts += 1
        assert false_accepts == 0


def test_c4_cross_identity_rejection_1000_each():
    with criterion(4, "cross-identity rejection, 1000+1000"):
        _, sas, _, cas = _golden_serials()
        rng = random.Random(4242)
        checked = 0
        while checked < 1000:
            other = random_imei(rng)
            if other.imei == DEV.imei:
                continue
            outcome = verify_sas_bytes(sas.to_bytes(), other, KEYS)
            assert not outcome.valid and outcome.reason == "DeviceMismatch", other.imei
            checked += 1
        checked = 0
        while checked < 1000:
            other = random_vm_uuid(rng)
            if other.uuid == VM.uuid:
                continue
            outcome = verify_cas_bytes(cas.to_bytes(), other, sas.to_bytes(), KEYS)
            assert not outcome.valid and outcome.reason == "VmMismatch", other.uuid
            checked += 1


def test_c5_imei_never_extractable_from_1000_serials():
    with criterion(5, "non-extractability over 1000 serials"):
        rng = random.Random(555)
        leaks = 0
        for _ in range(1000):
            dev = random_imei(rng)
            sars = encode_sars(dev, APP, rng.randbytes(16), rng.randbytes(16), KEYS)
            sas = issue_sas(sars, ENT, INS["issued_at"], KEYS)
            if dev.imei.encode("ascii") in sas.to_bytes():
                leaks += 1
        assert leaks == 0


def test_c6_authority_idempotence_and_single_binding():
    with criterion(6, "idempotence + racing devices"):
        # 100 sequential repeats: one ledger key, identical responses
        authority = LicenseAuthority({APP.hex: KEYS}, Ledger())
        authority.register_entitlement(APP, PURCHASE, LicenseType.SMARTPHONE_AND_CLOUD)
        rng = random.Random(6)
        responses = {
            authority.handle_smartphone_activation(
                armor(encode_sars(DEV, APP, PURCHASE, rng.randbytes(16), KEYS).to_bytes())
            )
            for _ in range(100)
        }
        assert len(responses) == 1
        assert len(authority.ledger.records) == 1

        # 100 randomized two-device interleavings: exactly one winner each time
        other = parse_imei(INS["other_imei"])
        for trial in range(100):
            authority = LicenseAuthority({APP.hex: KEYS}, Ledger())
            authority.register_entitlement(APP, PURCHASE, LicenseType.SMARTPHONE_AND_CLOUD)
            outcomes = []
            lock = threading.Lock()

            def activate(dev, delay):
                time.sleep(delay)
                sars = encode_sars(dev, APP, PURCHASE, rng.randbytes(16), KEYS)
                try:
                    authority.handle_smartphone_activation(armor(sars.to_bytes()))
                    result = "ok"
                except AlreadyActivatedOnOtherDevice:
                    result = "refused"
                with lock:
                    outcomes.append(result)

            delays = (rng.random() / 1000, rng.random() / 1000)
            threads = [
                threading.Thread(target=activate, args=(DEV, delays[0])),
                threading.Thread(target=activate, args=(other, delays[1])),
            ]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
            assert sorted(outcomes) == ["ok", "refused"], (trial, outcomes)
            assert len(authority.ledger.records) == 1


def test_c7_ledger_replay_at_every_line_boundary(tmp_path):
    with criterion(7, "ledger replay at every prefix"):
        path = tmp_path / "ledger.jsonl"
        counter = itertools.count(1_700_000_000)
        authority = LicenseAuthority({APP.hex: KEYS}, Ledger.load(path),
                                     clock=lambda: next(counter))
        snapshots = [(dict(authority.ledger.entitlements), dict(authority.ledger.records))]

        def snap():
            snapshots.append(
                (dict(authority.ledger.entitlements), dict(authority.ledger.records))
            )

        # four mutations -> four ledger lines
        authority.register_entitlement(APP, PURCHASE, LicenseType.SMARTPHONE_AND_CLOUD)
        snap()
        sas = authority.handle_smartphone_activation(
            armor(encode_sars(DEV, APP, PURCHASE, NONCE, KEYS).to_bytes())
        )
        snap()
        from pirax.serials import Sas

        cars = encode_cars(VM, Sas.parse(dearmor(sas)), APP, NONCE, KEYS)
        authority.handle_cloud_activation(armor(cars.to_bytes()))
        snap()
        authority.register_entitlement(APP, b"\x77" * 16, LicenseType.SMARTPHONE_ONLY)
        snap()

        lines = path.read_text().splitlines(keepends=True)
        assert len(lines) == 4
        for k in range(len(lines) + 1):
            prefix_path = tmp_path / f"prefix-{k}.jsonl"
            prefix_path.write_text("".join(lines[:k]))
            loaded = Ledger.load(prefix_path)
            want_entitlements, want_records = snapshots[k]
            assert loaded.entitlements == want_entitlements, f"prefix {k}"
            assert loaded.records == want_records, f"prefix {k}"


def test_c8_license_type_enforced_in_100_randomized_trials():
    with criterion(8, "license-type enforcement x100"):
        rng = random.Random(8)
        refused = 0
        for _ in range(100):
            authority = LicenseAuthority({APP.hex: KEYS}, Ledger())
            purchase = rng.randbytes(16)
            dev = random_imei(rng)
            vm = random_vm_uuid(rng)
            authority.register_entitlement(APP, purchase, LicenseType.SMARTPHONE_ONLY)
            sas_armored = authority.handle_smartphone_activation(
                armor(encode_sars(dev, APP, purchase, rng.randbytes(16), KEYS).to_bytes())
            )
            from pirax.serials import Sas

            cars = encode_cars(vm, Sas.parse(dearmor(sas_armored)), APP,
                               rng.randbytes(16), KEYS)
            try:
                authority.handle_cloud_activation(armor(cars.to_bytes()))
            except LicenseTypeInsufficient:
                refused += 1
        assert refused == 100


def test_c9_end_to_end_loopback_http_with_envelope(tmp_path):
    with criterion(9, "end-to-end HTTP + envelope"):
        channel = secrets.token_bytes(32)
        authority = LicenseAuthority({APP.hex: KEYS}, Ledger(tmp_path / "ledger.jsonl"))
        server = ProviderServer(("127.0.0.1", 0), authority, channel)
        server.serve_in_background()
        try:
            client = HttpAuthorityClient(server.url, channel)
            client.register_entitlement(APP, PURCHASE, LicenseType.SMARTPHONE_AND_CLOUD)

            device_state_path = tmp_path / "device.json"
            state = device_first_run(DEV, APP, PURCHASE, client, KEYS, device_state_path)
            assert device_gate(DEV, state, KEYS).allowed

            clone_path = tmp_path / "clone.json"
            state_store(clone_path, state)
            bound = clone_activate(VM, state, client, KEYS, clone_path)
            assert clone_gate(VM, bound, KEYS).allowed

            # corrupted envelope: rejected before any serial processing
            records_before = dict(authority.ledger.records)
            body = envelope.seal(
                channel,
                {"sars": armor(encode_sars(DEV, APP, b"\x01" * 16, NONCE, KEYS).to_bytes())},
            )
            raw = bytearray(dearmor(body["ciphertext"]))
            raw[0] ^= 0x01
            body["ciphertext"] = armor(bytes(raw))
            resp = requests.post(server.url + "/v1/activate/smartphone", json=body,
                                 timeout=5)
            assert resp.status_code == 400
            assert envelope.unseal(channel, resp.json())["code"] == "EnvelopeAuthFailed"
            assert authority.ledger.records == records_before
        finally:
            server.shutdown()
