"""Binary container shared by checkpoints and prepared-corpus archives.

Layout::

    b"NRTC\\n"                 magic
    uint64 little-endian       manifest length in bytes
    manifest                   UTF-8 JSON, sorted keys
    payload                    concatenated float64 little-endian arrays

The manifest lists every array as {name, shape, dtype, offset, nbytes}
(offsets relative to the payload start) together with a format version,
a ``kind`` tag, the payload's SHA-256 and free-form metadata.
"""
import hashlib
import json
import os
import struct

import numpy as np

MAGIC = b"NRTC\n"
FORMAT_VERSION = "nrt-container/1"
DTYPE = "<f8"


class ContainerError(RuntimeError):
    pass


def write_container(path, kind, arrays, meta):
    entries, chunks, offset = [], [], 0
    for name, arr in arrays.items():
        data = np.ascontiguousarray(arr, dtype=DTYPE).tobytes()
        entries.append({"name": name, "shape": list(np.shape(arr)), "dtype": DTYPE,
                        "offset": offset, "nbytes": len(data)})
        chunks.append(data)
        offset += len(data)
    payload = b"".join(chunks)
    manifest = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "arrays": entries,
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
        "meta": meta,
    }
    blob = json.dumps(manifest, sort_keys=True, separators=(",", ":")).encode("utf-8")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        fh.write(payload)
    os.replace(tmp, path)


def read_container(path, kind=None):
    """Return (meta, arrays); raises ContainerError on any inconsistency."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw.startswith(MAGIC):
        raise ContainerError(f"{path}: not an NRT container (bad magic)")
    head = len(MAGIC) + 8
    if len(raw) < head:
        raise ContainerError(f"{path}: truncated header")
    (mlen,) = struct.unpack("<Q", raw[len(MAGIC):head])
    if len(raw) < head + mlen:
        raise ContainerError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(raw[head:head + mlen].decode("utf-8"))
    except ValueError as exc:
        raise ContainerError(f"{path}: unreadable manifest ({exc})") from None
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ContainerError(f"{path}: field format_version is {version!r}, expected {FORMAT_VERSION!r}")
    if kind is not None and manifest.get("kind") != kind:
        raise ContainerError(f"{path}: field kind is {manifest.get('kind')!r}, expected {kind!r}")
    payload = raw[head + mlen:]
    if len(payload) != manifest["payload_bytes"]:
        raise ContainerError(
            f"{path}: payload has {len(payload)} bytes, manifest says {manifest['payload_bytes']}"
        )
    if hashlib.sha256(payload).hexdigest() != manifest["payload_sha256"]:
        raise ContainerError(f"{path}: payload checksum mismatch")
    arrays = {}
    for e in manifest["arrays"]:
        if e["dtype"] != DTYPE:
            raise ContainerError(f"{path}: array {e['name']} has dtype {e['dtype']}")
        count = int(np.prod(e["shape"], dtype=np.int64))
        if count * 8 != e["nbytes"] or e["offset"] + e["nbytes"] > len(payload):
            raise ContainerError(f"{path}: array {e['name']} extends past the payload")
        arr = np.frombuffer(payload, dtype=DTYPE, count=count, offset=e["offset"])
        arrays[e["name"]] = arr.astype(np.float64).reshape(e["shape"])
    return manifest["meta"], arrays


def file_sha256(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()
