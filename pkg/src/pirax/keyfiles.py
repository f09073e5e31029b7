"""Key file formats: per-application codec keys and the channel key.

Both files are JSON with hex-encoded 32-byte keys, e.g.

  keys.json     {"app_id": "<32 hex>", "request_key": "<64 hex>", "issue_key": "<64 hex>"}
  channel.json  {"channel_key": "<64 hex>"}
"""

from __future__ import annotations

import json
import os
import secrets
from pathlib import Path

from .errors import ValidationError
from .identity import ApplicationId
from .serials import KeyMaterial

KEYS_ENV_VAR = "PIRAX_KEYS"


def _read_json(path: str | os.PathLike) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ValidationError(f"key file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"key file {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValidationError(f"key file {path} must hold a JSON object")
    return doc


def _hex_key(doc: dict, field: str, path: str | os.PathLike) -> bytes:
    value = doc.get(field)
    if not isinstance(value, str):
        raise ValidationError(f"key file {path} is missing {field!r}")
    try:
        raw = bytes.fromhex(value)
    except ValueError:
        raise ValidationError(f"{field} in {path} is not hex") from None
    if len(raw) != 32:
        raise ValidationError(f"{field} in {path} must be 32 bytes, got {len(raw)}")
    return raw


def load_keys(path: str | os.PathLike) -> tuple[ApplicationId, KeyMaterial]:
    doc = _read_json(path)
    app_hex = doc.get("app_id")
    if not isinstance(app_hex, str):
        raise ValidationError(f"key file {path} is missing 'app_id'")
    app_id = ApplicationId.from_hex(app_hex)
    keys = KeyMaterial(_hex_key(doc, "request_key", path), _hex_key(doc, "issue_key", path))
    return app_id, keys


def save_keys(path: str | os.PathLike, app_id: ApplicationId, keys: KeyMaterial) -> None:
    doc = {
        "app_id": app_id.hex,
        "request_key": keys.request_key.hex(),
        "issue_key": keys.issue_key.hex(),
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def load_channel_key(path: str | os.PathLike) -> bytes:
    return _hex_key(_read_json(path), "channel_key", path)


def save_channel_key(path: str | os.PathLike, key: bytes | None = None) -> bytes:
    key = key or secrets.token_bytes(32)
    if len(key) != 32:
        raise ValidationError("channel key must be 32 bytes")
    Path(path).write_text(json.dumps({"channel_key": key.hex()}, indent=2) + "\n")
    return key


def resolve_keys_path(cli_value: str | None) -> str:
    """--keys flag wins; the PIRAX_KEYS environment variable is the fallback."""
    path = cli_value or os.environ.get(KEYS_ENV_VAR)
    if not path:
        raise ValidationError(f"no key file given (--keys or {KEYS_ENV_VAR})")
    return path
