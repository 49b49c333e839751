"""Policy document parsing and serialization.

Documents are UTF-8 JSON, one device per file, laid out like::

    {"Netatmo Weather Station": {
      "MACAddr": "70:ee:50:13:ab:cd",
      "IPAddr": "172.16.1.2",
      "AllowedDNSQueries": [
        {"type": "A", "query": "netcom.netatmo.net", "resolver": "192.168.1.1"}
      ],
      "AllowedDNSReplies": [...],
      "AllowedConnections": [...]
     }
    }

``AllowedLookups`` is accepted as an alias of ``AllowedDNSQueries`` on input;
output always uses the canonical key.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from iotfence.errors import InvariantError, PolicyError, PolicySyntaxError, SchemaError
from iotfence.fileio import write_atomic
from iotfence.policy.models import DevicePolicy

logger = logging.getLogger(__name__)

# pydantic error types that mean "the document has the wrong shape"
_SCHEMA_ERROR_TYPES = frozenset(
    {
        "extra_forbidden",
        "missing",
        "model_type",
        "model_attributes_type",
        "dict_type",
        "list_type",
        "tuple_type",
        "string_type",
        "int_type",
        "is_instance_of",
    }
)


def _format_loc(loc: tuple[Any, ...]) -> str:
    out = ""
    for part in loc:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += f".{part}" if out else str(part)
    return out


def _translate(exc: ValidationError) -> PolicyError:
    """Turn the first pydantic error into the matching iotfence error."""
    error = exc.errors()[0]
    location = _format_loc(error["loc"]) or None
    original = (error.get("ctx") or {}).get("error")
    if isinstance(original, PolicyError):
        if original.location is None:
            original.location = location
        return original
    if error["type"] in _SCHEMA_ERROR_TYPES:
        return SchemaError(error["msg"], location=location)
    return InvariantError(error["msg"], location=location)


def policy_from_dict(document: Any) -> DevicePolicy:
    """Build a DevicePolicy from an already-decoded ``{device_name: {...}}`` mapping."""
    if not isinstance(document, dict) or len(document) != 1:
        raise SchemaError("policy document must be an object with exactly one device-name key")
    ((device_name, body),) = document.items()
    if not isinstance(body, dict):
        raise SchemaError("device entry must be an object", location=device_name)
    if "device_name" in body:
        raise SchemaError("Extra inputs are not permitted", location=f"{device_name}.device_name")
    try:
        return DevicePolicy.model_validate({**body, "device_name": device_name}, by_alias=True, by_name=False)
    except ValidationError as e:
        raise _translate(e) from e


def parse_policy(document: str | bytes) -> DevicePolicy:
    """Parse policy JSON text (strict schema)."""
    try:
        decoded = json.loads(document)
    except json.JSONDecodeError as e:
        raise PolicySyntaxError(f"malformed JSON: {e.msg} (line {e.lineno}, column {e.colno})") from e
    return policy_from_dict(decoded)


def policy_to_dict(policy: DevicePolicy) -> dict[str, Any]:
    return {policy.device_name: policy.model_dump(mode="json", by_alias=True, exclude_none=True)}


def serialize_policy(policy: DevicePolicy) -> str:
    """Serialize a policy in the canonical layout (one rule per line)."""
    body = policy_to_dict(policy)[policy.device_name]
    lines = [f"{{{_dumps(policy.device_name)}: {{"]
    items = list(body.items())
    for i, (key, value) in enumerate(items):
        comma = "," if i < len(items) - 1 else ""
        if isinstance(value, list) and value:
            lines.append(f"  {_dumps(key)}: [")
            lines.extend(f"    {_dumps(rule)}{',' if j < len(value) - 1 else ''}" for j, rule in enumerate(value))
            lines.append(f"  ]{comma}")
        else:
            lines.append(f"  {_dumps(key)}: {_dumps(value)}{comma}")
    lines.append(" }")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dumps(value: Any) -> str:
    return json.dumps(value, ensure_ascii=False)


def load_policy(path: Path) -> DevicePolicy:
    logger.debug("Loading policy from %s", path)
    return parse_policy(Path(path).read_text(encoding="utf-8"))


def save_policy(policy: DevicePolicy, path: Path) -> None:
    write_atomic(path, serialize_policy(policy))
    logger.info("Wrote policy for %s to %s", policy.device_name, path)
