"""HTTP surface over real loopback sockets, plaintext and envelope modes."""

import itertools
import json
import secrets

import pytest
import requests

from pirax import envelope
from pirax.authority import LicenseAuthority
from pirax.client import HttpAuthorityClient
from pirax.errors import (
    AlreadyActivatedOnOtherDevice,
    AuthorityUnreachable,
    EntitlementNotFound,
    EnvelopeAuthFailed,
    LicenseTypeInsufficient,
    ValidationError,
)
from pirax.identity import ApplicationId, LicenseType, parse_imei
from pirax.ledger import Ledger
from pirax.serials import KeyMaterial, armor, dearmor, encode_sars
from pirax.service import ProviderServer, parse_listen_address

APP = ApplicationId.from_hex("cccccccccccccccccccccccccccccccc")
KEYS = KeyMaterial(bytes(range(2, 34)), bytes(range(34, 66)))
DEV = parse_imei("490154203237518")
PURCHASE = b"\x33" * 16


def _server(channel_key=None):
    counter = itertools.count(1_700_000_000)
    authority = LicenseAuthority({APP.hex: KEYS}, Ledger(), clock=lambda: next(counter))
    server = ProviderServer(("127.0.0.1", 0), authority, channel_key)
    server.serve_in_background()
    return server


@pytest.fixture
def plain():
    server = _server()
    yield server
    server.shutdown()


@pytest.fixture
def sealed():
    key = secrets.token_bytes(32)
    server = _server(key)
    yield server, key
    server.shutdown()


def _sars_armored(nonce=b"\x00" * 16):
    return armor(encode_sars(DEV, APP, PURCHASE, nonce, KEYS).to_bytes())


class TestPlainTransport:
    def test_health(self, plain):
        client = HttpAuthorityClient(plain.url)
        assert client.health()

    def test_entitle_then_activate(self, plain):
        client = HttpAuthorityClient(plain.url)
        client.register_entitlement(APP, PURCHASE, LicenseType.SMARTPHONE_AND_CLOUD)
        sas = client.activate_smartphone(_sars_armored())
        assert isinstance(sas, str) and dearmor(sas)

    def test_error_codes_and_statuses(self, plain):
        client = HttpAuthorityClient(plain.url)
        with pytest.raises(EntitlementNotFound):
            client.activate_smartphone(_sars_armored())
        r = requests.post(plain.url + "/v1/activate/smartphone",
                          json={"sars": _sars_armored()}, timeout=5)
        assert r.status_code == 404 and r.json()["code"] == "EntitlementNotFound"

    def test_conflict_status_for_second_device(self, plain):
        client = HttpAuthorityClient(plain.url)
        client.register_entitlement(APP, PURCHASE, LicenseType.SMARTPHONE_AND_CLOUD)
        client.activate_smartphone(_sars_armored())
        other = parse_imei("357805023984942")
        body = {"sars": armor(encode_sars(other, APP, PURCHASE, b"\x00" * 16, KEYS).to_bytes())}
        r = requests.post(plain.url + "/v1/activate/smartphone", json=body, timeout=5)
        assert r.status_code == 409 and r.json()["code"] == AlreadyActivatedOnOtherDevice.code

    def test_forbidden_status_for_license_type(self, plain):
        from pirax.serials import Sas, encode_cars
        from pirax.identity import parse_uuid

        client = HttpAuthorityClient(plain.url)
        client.register_entitlement(APP, PURCHASE, LicenseType.SMARTPHONE_ONLY)
        sas = client.activate_smartphone(_sars_armored())
        cars = encode_cars(parse_uuid("123e4567-e89b-12d3-a456-426614174000"),
                           Sas.parse(dearmor(sas)), APP, b"\x00" * 16, KEYS)
        r = requests.post(plain.url + "/v1/activate/cloud",
                          json={"cars": armor(cars.to_bytes())}, timeout=5)
        assert r.status_code == 403 and r.json()["code"] == LicenseTypeInsufficient.code

    def test_unknown_route_404(self, plain):
        r = requests.post(plain.url + "/v1/nope", json={}, timeout=5)
        assert r.status_code == 404

    def test_malformed_body_is_validation_error(self, plain):
        r = requests.post(plain.url + "/v1/activate/smartphone",
                          data=b"not json", timeout=5)
        assert r.status_code == 400 and r.json()["code"] == ValidationError.code

    def test_bad_hex_is_validation_error(self, plain):
        r = requests.post(plain.url + "/v1/entitlements",
                          json={"app_id": APP.hex, "purchase_token": "zz",
                                "license_type": "smartphone_only"}, timeout=5)
        assert r.status_code == 400 and r.json()["code"] == ValidationError.code

    def test_client_handles_unreachable_authority(self):
        client = HttpAuthorityClient("http://127.0.0.1:9", timeout=0.5)
        with pytest.raises(AuthorityUnreachable):
            client.activate_smartphone(_sars_armored())


class TestEnvelopeTransport:
    def test_full_flow_sealed(self, sealed):
        server, key = sealed
        client = HttpAuthorityClient(server.url, key)
        client.register_entitlement(APP, PURCHASE, LicenseType.SMARTPHONE_AND_CLOUD)
        sas = client.activate_smartphone(_sars_armored())
        assert dearmor(sas)

    def test_wire_bodies_are_really_sealed(self, sealed):
        server, key = sealed
        body = envelope.seal(key, {"app_id": APP.hex, "purchase_token": PURCHASE.hex(),
                                   "license_type": "smartphone_and_cloud"})
        r = requests.post(server.url + "/v1/entitlements", json=body, timeout=5)
        doc = r.json()
        assert set(doc) == {"nonce", "ciphertext"}  # response is sealed too
        assert envelope.unseal(key, doc) == {"registered": True}

    def test_plaintext_body_rejected_when_envelope_on(self, sealed):
        server, _ = sealed
        r = requests.post(server.url + "/v1/activate/smartphone",
                          json={"sars": _sars_armored()}, timeout=5)
        assert r.status_code == 400

    def test_corrupted_envelope_rejected_before_serial_processing(self, sealed):
        server, key = sealed
        server.authority.register_entitlement(APP, PURCHASE,
                                              LicenseType.SMARTPHONE_AND_CLOUD)
        body = envelope.seal(key, {"sars": _sars_armored()})
        raw = bytearray(dearmor(body["ciphertext"]))
        raw[3] ^= 0x01
        body["ciphertext"] = armor(bytes(raw))
        r = requests.post(server.url + "/v1/activate/smartphone", json=body, timeout=5)
        assert r.status_code == 400
        assert envelope.unseal(key, r.json())["code"] == EnvelopeAuthFailed.code
        assert server.authority.ledger.records == {}  # nothing was processed

    def test_wrong_channel_key_client_side(self, sealed):
        server, _ = sealed
        client = HttpAuthorityClient(server.url, secrets.token_bytes(32))
        with pytest.raises((EnvelopeAuthFailed, Exception)):
            client.activate_smartphone(_sars_armored())


class TestListenAddress:
    def test_parse(self):
        assert parse_listen_address("0.0.0.0:8000") == ("0.0.0.0", 8000)
        assert parse_listen_address(":9000") == ("127.0.0.1", 9000)

    def test_reject(self):
        with pytest.raises(ValidationError):
            parse_listen_address("no-port")
