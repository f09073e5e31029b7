"""Clients that runtime agents use to reach the license authority.

Two transports with one contract: the loopback client calls an
in-process authority directly (scenario harness), the HTTP client talks
to the real service, optionally sealing every body in the channel
envelope. Both surface failures as the same exception types, keyed by
the stable wire codes.
"""

from __future__ import annotations

import json

import requests

from . import envelope
from .authority import LicenseAuthority
from .errors import AuthorityUnreachable, EnvelopeMalformed, PiraxError, error_for_code
from .identity import ApplicationId, LicenseType


class AuthorityClient:
    """Transport-agnostic authority interface."""

    def activate_smartphone(self, sars_armored: str) -> str:
        raise NotImplementedError

    def activate_cloud(self, cars_armored: str) -> str:
        raise NotImplementedError

    def register_entitlement(
        self, app_id: ApplicationId, purchase_token: bytes, license_type: LicenseType
    ) -> None:
        raise NotImplementedError


class LoopbackAuthorityClient(AuthorityClient):
    """In-process shim; exceptions pass through untranslated."""

    def __init__(self, authority: LicenseAuthority):
        self.authority = authority

    def activate_smartphone(self, sars_armored: str) -> str:
        return self.authority.handle_smartphone_activation(sars_armored)

    def activate_cloud(self, cars_armored: str) -> str:
        return self.authority.handle_cloud_activation(cars_armored)

    def register_entitlement(self, app_id, purchase_token, license_type) -> None:
        self.authority.register_entitlement(app_id, purchase_token, license_type)


class HttpAuthorityClient(AuthorityClient):
    def __init__(self, base_url: str, channel_key: bytes | None = None, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.channel_key = channel_key
        self.timeout = timeout

    def _post(self, path: str, payload: dict) -> dict:
        body = envelope.seal(self.channel_key, payload) if self.channel_key else payload
        try:
            resp = requests.post(
                self.base_url + path, json=body, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise AuthorityUnreachable(f"POST {path}: {exc}") from None
        return self._decode(resp)

    def _decode(self, resp: requests.Response) -> dict:
        try:
            doc = resp.json()
        except json.JSONDecodeError:
            raise EnvelopeMalformed(
                f"authority returned a non-JSON body (HTTP {resp.status_code})"
            ) from None
        if self.channel_key:
            doc = envelope.unseal(self.channel_key, doc)
        if resp.status_code != 200 or "code" in doc:
            raise error_for_code(doc.get("code", "PiraxError"), doc.get("message", ""))
        return doc

    def activate_smartphone(self, sars_armored: str) -> str:
        return self._post("/v1/activate/smartphone", {"sars": sars_armored})["sas"]

    def activate_cloud(self, cars_armored: str) -> str:
        return self._post("/v1/activate/cloud", {"cars": cars_armored})["cas"]

    def register_entitlement(self, app_id, purchase_token, license_type) -> None:
        self._post(
            "/v1/entitlements",
            {
                "app_id": app_id.hex,
                "purchase_token": purchase_token.hex(),
                "license_type": license_type.label,
            },
        )

    def health(self) -> bool:
        try:
            resp = requests.get(self.base_url + "/v1/health", timeout=self.timeout)
        except requests.RequestException as exc:
            raise AuthorityUnreachable(f"GET /v1/health: {exc}") from None
        return resp.status_code == 200


__all__ = [
    "AuthorityClient",
    "LoopbackAuthorityClient",
    "HttpAuthorityClient",
    "PiraxError",
]
