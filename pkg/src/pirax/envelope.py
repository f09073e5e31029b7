"""Authenticated-encryption envelope for request/response bodies.

When the channel is in envelope mode, every HTTP body is replaced by
``{"nonce": <armored 12 bytes>, "ciphertext": <armored>}`` sealed with
AES-256-GCM under a pre-shared channel key. A fresh random nonce is
drawn per message; the fixed AAD tag stops cross-protocol reuse of the
channel key.
"""

from __future__ import annotations

import json
import secrets

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import ArmorMalformed, EnvelopeAuthFailed, EnvelopeMalformed, ValidationError
from .serials import armor, dearmor

NONCE_LEN = 12
_AAD = b"pirax-envelope-v1"


def seal(channel_key: bytes, payload: dict) -> dict:
    """Encrypt a JSON payload into an envelope body."""
    if len(channel_key) != 32:
        raise ValidationError("channel key must be 32 bytes")
    nonce = secrets.token_bytes(NONCE_LEN)
    plaintext = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ciphertext = AESGCM(channel_key).encrypt(nonce, plaintext, _AAD)
    return {"nonce": armor(nonce), "ciphertext": armor(ciphertext)}


def unseal(channel_key: bytes, body: dict) -> dict:
    """Decrypt an envelope body back into its JSON payload."""
    if not isinstance(body, dict) or set(body) != {"nonce", "ciphertext"}:
        raise EnvelopeMalformed("envelope body must be {nonce, ciphertext}")
    try:
        nonce = dearmor(body["nonce"])
        ciphertext = dearmor(body["ciphertext"])
    except ArmorMalformed as exc:
        raise EnvelopeMalformed(str(exc)) from None
    if len(nonce) != NONCE_LEN:
        raise EnvelopeMalformed(f"nonce must be {NONCE_LEN} bytes")
    try:
        plaintext = AESGCM(channel_key).decrypt(nonce, ciphertext, _AAD)
    except InvalidTag:
        raise EnvelopeAuthFailed("envelope failed authentication") from None
    try:
        payload = json.loads(plaintext.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError):
        raise EnvelopeMalformed("envelope plaintext is not JSON") from None
    if not isinstance(payload, dict):
        raise EnvelopeMalformed("envelope payload must be a JSON object")
    return payload
