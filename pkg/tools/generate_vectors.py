#!/usr/bin/env python3
"""Regenerate vectors/serials.json from the test-side reference oracle.

The vectors are computed exclusively by tests/reference_oracle.py (manual
HMAC + manual base64); the production codec is required to match them.
"""

from __future__ import annotations

import json
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "tests"))

from reference_oracle import build_golden_vectors  # noqa: E402


def main() -> None:
    out = ROOT / "vectors" / "serials.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(build_golden_vectors(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
