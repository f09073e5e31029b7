"""HTTP shell around the license authority.

Endpoints (JSON bodies, armored serial fields):

  POST /v1/activate/smartphone   {"sars": ...} -> {"sas": ...}
  POST /v1/activate/cloud        {"cars": ...} -> {"cas": ...}
  POST /v1/entitlements          {"app_id", "purchase_token", "license_type"} -> {"registered": true}
  GET  /v1/health                -> {"status": "ok"}

Errors come back as {"code", "message"} with the stable library codes.
With a channel key configured, every POST body in both directions is
replaced by the sealed envelope; a body that fails envelope
authentication is rejected before any serial is even parsed.
"""

from __future__ import annotations

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from . import envelope
from .authority import LicenseAuthority
from .errors import (
    AlreadyActivatedOnOtherDevice,
    CloudAlreadyBound,
    DuplicateEntitlement,
    EntitlementNotFound,
    EnvelopeAuthFailed,
    EnvelopeMalformed,
    LicenseTypeInsufficient,
    PiraxError,
    UnknownSas,
    ValidationError,
)
from .identity import ApplicationId, LicenseType

log = logging.getLogger("pirax.service")

_STATUS_FOR_CODE = {
    EntitlementNotFound.code: 404,
    UnknownSas.code: 404,
    AlreadyActivatedOnOtherDevice.code: 409,
    CloudAlreadyBound.code: 409,
    DuplicateEntitlement.code: 409,
    LicenseTypeInsufficient.code: 403,
}

_MAX_BODY = 1 << 20


class _Handler(BaseHTTPRequestHandler):
    server: "ProviderServer"
    protocol_version = "HTTP/1.1"

    def log_message(self, fmt, *args):  # quiet by default; observable via logging
        log.debug("%s %s", self.address_string(), fmt % args)

    # -- plumbing --------------------------------------------------------------

    def _read_body(self) -> dict:
        length = int(self.headers.get("Content-Length", 0))
        if length > _MAX_BODY:
            raise ValidationError("request body too large")
        try:
            doc = json.loads(self.rfile.read(length) or b"{}")
        except json.JSONDecodeError:
            raise ValidationError("request body is not JSON") from None
        if not isinstance(doc, dict):
            raise ValidationError("request body must be a JSON object")
        if self.server.channel_key is not None:
            doc = envelope.unseal(self.server.channel_key, doc)
        return doc

    def _send(self, status: int, payload: dict, sealed: bool = True) -> None:
        if sealed and self.server.channel_key is not None:
            payload = envelope.seal(self.server.channel_key, payload)
        body = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _send_error(self, err: PiraxError) -> None:
        status = _STATUS_FOR_CODE.get(err.code, 400)
        self._send(status, {"code": err.code, "message": err.message})

    def _field(self, doc: dict, name: str) -> str:
        value = doc.get(name)
        if not isinstance(value, str):
            raise ValidationError(f"missing or non-string field {name!r}")
        return value

    # -- routes ------------------------------------------------------------------

    def do_GET(self):
        if self.path == "/v1/health":
            self._send(200, {"status": "ok"}, sealed=False)
        else:
            self._send(404, {"code": "NotFound", "message": f"no route {self.path}"},
                       sealed=False)

    def do_POST(self):
        try:
            doc = self._read_body()
        except (EnvelopeAuthFailed, EnvelopeMalformed, ValidationError) as err:
            self._send_error(err)
            return
        try:
            if self.path == "/v1/activate/smartphone":
                sas = self.server.authority.handle_smartphone_activation(
                    self._field(doc, "sars")
                )
                self._send(200, {"sas": sas})
            elif self.path == "/v1/activate/cloud":
                cas = self.server.authority.handle_cloud_activation(self._field(doc, "cars"))
                self._send(200, {"cas": cas})
            elif self.path == "/v1/entitlements":
                self.server.authority.register_entitlement(
                    ApplicationId.from_hex(self._field(doc, "app_id")),
                    bytes.fromhex(self._field(doc, "purchase_token")),
                    LicenseType.from_label(self._field(doc, "license_type")),
                )
                self._send(200, {"registered": True})
            else:
                self._send(404, {"code": "NotFound", "message": f"no route {self.path}"})
        except PiraxError as err:
            self._send_error(err)
        except ValueError as exc:  # bad hex and friends
            self._send_error(ValidationError(str(exc)))
        except Exception:
            log.exception("unhandled error serving %s", self.path)
            self._send(500, {"code": "InternalError", "message": "internal error"})


class ProviderServer(ThreadingHTTPServer):
    """License authority behind a threading HTTP server."""

    daemon_threads = True

    def __init__(self, address: tuple[str, int], authority: LicenseAuthority,
                 channel_key: bytes | None = None):
        super().__init__(address, _Handler)
        self.authority = authority
        self.channel_key = channel_key

    @property
    def url(self) -> str:
        host, port = self.server_address[:2]
        return f"http://{host}:{port}"

    def serve_in_background(self) -> threading.Thread:
        thread = threading.Thread(target=self.serve_forever, name="pirax-provider", daemon=True)
        thread.start()
        return thread


def parse_listen_address(text: str) -> tuple[str, int]:
    host, sep, port = text.rpartition(":")
    if not sep or not port.isdigit():
        raise ValidationError(f"listen address must be HOST:PORT, got {text!r}")
    return (host or "127.0.0.1", int(port))
