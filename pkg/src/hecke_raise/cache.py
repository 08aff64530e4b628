"""On-disk, content-addressed cache for modular symbol spaces and Hecke matrices.

The directory comes from ``HECKE_RAISE_CACHE`` (``off`` disables caching);
by default it is ``$XDG_CACHE_HOME/hecke-raise`` or ``~/.cache/hecke-raise``.
Entries are written to a temporary file and renamed into place, and carry a
sha256 checksum of their payload.  Any problem reading an entry means it is
rebuilt; any problem writing one is ignored after a warning.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import tempfile
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .modsym import NORMALIZATION_VERSION, ModSymSpace

CACHE_ENV = "HECKE_RAISE_CACHE"
CACHE_FORMAT = "1"
_MAGIC = b"HRC1"


class CacheWarning(UserWarning):
    pass


@dataclass(frozen=True)
class CacheEntry:
    key: tuple
    payload: dict
    checksum: str


def cache_dir() -> Path | None:
    raw = os.environ.get(CACHE_ENV)
    if raw is not None and raw.strip().lower() == "off":
        return None
    if raw:
        return Path(raw)
    base = os.environ.get("XDG_CACHE_HOME") or os.path.join(os.path.expanduser("~"), ".cache")
    return Path(base) / "hecke-raise"


def _key_name(key: tuple) -> str:
    full = [CACHE_FORMAT, NORMALIZATION_VERSION, *[str(k) for k in key]]
    return hashlib.sha256(json.dumps(full).encode()).hexdigest()[:32] + ".npz"


def _encode(payload: dict) -> bytes:
    buf = io.BytesIO()
    np.savez(buf, **payload)
    body = buf.getvalue()
    return _MAGIC + hashlib.sha256(body).hexdigest().encode() + b"\n" + body


def _decode(blob: bytes) -> CacheEntry:
    if not blob.startswith(_MAGIC) or len(blob) < len(_MAGIC) + 65:
        raise ValueError("bad header")
    checksum = blob[len(_MAGIC) : len(_MAGIC) + 64].decode()
    body = blob[len(_MAGIC) + 65 :]
    if hashlib.sha256(body).hexdigest() != checksum:
        raise ValueError("checksum mismatch")
    with np.load(io.BytesIO(body), allow_pickle=False) as z:
        payload = {k: z[k] for k in z.files}
    return CacheEntry((), payload, checksum)


def _write(path: Path, blob: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=".part")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def cache_get_or_build(
    key: tuple,
    build: Callable[[], object],
    to_payload: Callable[[object], dict],
    from_payload: Callable[[dict], object],
) -> tuple[object, bool]:
    """Return ``(value, hit)``: the cached value for ``key`` or a fresh build."""
    root = cache_dir()
    if root is None:
        return build(), False
    path = root / _key_name(key)
    if path.exists():
        try:
            entry = _decode(path.read_bytes())
            return from_payload(entry.payload), True
        except Exception as exc:
            warnings.warn(f"cache entry {path} is unreadable ({exc}); recomputing", CacheWarning, stacklevel=2)
    value = build()
    try:
        _write(path, _encode(to_payload(value)))
    except Exception as exc:
        warnings.warn(f"could not write cache entry {path}: {exc}", CacheWarning, stacklevel=2)
    return value, False


def _space_payload(S: ModSymSpace) -> dict:
    d = S.to_payload()
    d["fingerprint"] = np.frombuffer(S.fingerprint.encode(), dtype=np.uint8)
    return d


def _space_from_payload(d: dict) -> ModSymSpace:
    S = ModSymSpace.from_payload(d)
    want = bytes(d["fingerprint"]).decode()
    if S.fingerprint != want:
        raise ValueError("fingerprint mismatch after reload")
    return S


def load_space(M: int, sign: int) -> tuple[ModSymSpace, bool]:
    return cache_get_or_build(
        ("space", int(M), int(sign)),
        lambda: ModSymSpace(int(M), int(sign)),
        _space_payload,
        _space_from_payload,
    )


def install() -> None:
    """Route ``modsym_space`` through the disk cache."""
    from .modsym import set_space_loader

    set_space_loader(lambda M, sign: load_space(M, sign)[0])
