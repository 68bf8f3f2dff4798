"""Canonical serialization, digests, and reproducibility manifests.

Every artifact is written through canonical_json so that runs with equal
seeds and configs produce byte-identical files. Timestamps honor
SOURCE_DATE_EPOCH (the reproducible-builds convention); run ids are digests
of config, seed, and input digests rather than random.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
import os
from pathlib import Path
from typing import Any, Iterable


def jsonable(value: Any) -> Any:
    """Recursively convert to JSON-safe values; non-finite floats become None."""
    if isinstance(value, float):
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return [jsonable(v) for v in sorted(value)]
    return value


def canonical_json(obj: Any) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def digest_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def digest_obj(obj: Any) -> str:
    return digest_text(canonical_json(obj))


def digest_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def make_run_id(config_digest: str, seed: int | None, input_digests: Iterable[str] = ()) -> str:
    """Deterministic run identifier: same config, seed, and inputs, same id."""
    material = "\x1f".join([config_digest, str(seed), *sorted(input_digests)])
    return digest_text(material)[:16]


def timestamp() -> str:
    """ISO-8601 UTC timestamp; pinned by SOURCE_DATE_EPOCH when set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch is not None:
        moment = _dt.datetime.fromtimestamp(int(epoch), tz=_dt.timezone.utc)
    else:
        moment = _dt.datetime.now(tz=_dt.timezone.utc)
    return moment.strftime("%Y-%m-%dT%H:%M:%SZ")


def write_jsonl(path: str | Path, rows: Iterable[Any]) -> int:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(canonical_json(row))
            fh.write("\n")
            count += 1
    return count


def read_jsonl(path: str | Path) -> list[Any]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(json.loads(line))
    return out


def write_json(path: str | Path, obj: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(canonical_json(obj) + "\n", encoding="utf-8")


def manifest_path(artifact_path: str | Path) -> Path:
    p = Path(artifact_path)
    return p.with_name(p.name + ".manifest.json")


def write_manifest(
    artifact_path: str | Path,
    *,
    run_id: str,
    config_digest: str,
    count: int | None = None,
    inputs: dict[str, str] | None = None,
    versions: dict[str, str] | None = None,
) -> dict:
    manifest: dict[str, Any] = {
        "run_id": run_id,
        "config_digest": config_digest,
        "created_at": timestamp(),
    }
    if count is not None:
        manifest["count"] = count
    if inputs is not None:
        manifest["inputs"] = inputs
    if versions is not None:
        manifest["versions"] = versions
    write_json(manifest_path(artifact_path), manifest)
    return manifest
