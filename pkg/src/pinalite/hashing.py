"""Two-level hashing of what a user saw on a screen.

The client never uploads plaintext. It hashes (app context, content) with
SHA-512 and sends the hex digest; the server hashes that digest again with a
64-byte salt it alone holds. Counting and comparison happen on the salted
hashes only, so a leaked server state file cannot be joined against a
dictionary of guessed strings without the salt.
"""

from __future__ import annotations

import hashlib
import os
import re
import secrets
import uuid as uuid_module
from dataclasses import dataclass
from pathlib import Path

from .errors import StateFileError
from .screens import AppContext

# Unit separator: unambiguous field joins, rejected inside the fields themselves.
DELIMITER = b"\x1f"
SALT_LENGTH = 64
SALT_FILE_ENV = "PINALITE_SALT_FILE"

_HEX_128 = re.compile(r"[0-9a-f]{128}")


@dataclass(frozen=True)
class ClientHash:
    """SHA-512 of (app context, content), computed on the user's device."""

    hex: str

    def __post_init__(self):
        if not _HEX_128.fullmatch(self.hex):
            raise ValueError("client hash must be 128 lowercase hex characters")


@dataclass(frozen=True)
class SaltedHash:
    """Server-side SHA-512 over a client hash and the server salt."""

    hex: str

    def __post_init__(self):
        if not _HEX_128.fullmatch(self.hex):
            raise ValueError("salted hash must be 128 lowercase hex characters")


@dataclass(frozen=True)
class Salt:
    """64 random bytes held in a server-readable key file, never shipped."""

    value: bytes

    def __post_init__(self):
        if len(self.value) != SALT_LENGTH:
            raise ValueError(f"salt must be exactly {SALT_LENGTH} bytes")

    def __repr__(self) -> str:
        return "Salt(<64 bytes withheld>)"


@dataclass(frozen=True)
class UserId:
    """Anonymous, resettable per-install identifier."""

    uuid: str

    def __post_init__(self):
        try:
            parsed = uuid_module.UUID(self.uuid)
        except ValueError:
            raise ValueError(f"not a UUID: {self.uuid!r}") from None
        if str(parsed) != self.uuid:
            raise ValueError("user id must be in canonical lowercase UUID form")

    @staticmethod
    def fresh() -> "UserId":
        return UserId(str(uuid_module.uuid4()))


def canonical_pair_bytes(ctx: AppContext, content: str) -> bytes:
    """Byte layout hashed for a (context, content) pair.

    package 0x1F activity 0x1F content. AppContext construction already
    rejects the delimiter inside its fields, so the layout is unambiguous.
    """
    return (ctx.package_name.encode("utf-8") + DELIMITER
            + ctx.activity_name.encode("utf-8") + DELIMITER
            + content.encode("utf-8"))


def canonical_context_bytes(ctx: AppContext) -> bytes:
    return (ctx.package_name.encode("utf-8") + DELIMITER
            + ctx.activity_name.encode("utf-8"))


def client_hash_pair(ctx: AppContext, content: str) -> ClientHash:
    digest = hashlib.sha512(canonical_pair_bytes(ctx, content)).hexdigest()
    return ClientHash(digest)


def client_hash_context(ctx: AppContext) -> ClientHash:
    digest = hashlib.sha512(canonical_context_bytes(ctx)).hexdigest()
    return ClientHash(digest)


def salted_hash(h: ClientHash, salt: Salt) -> SaltedHash:
    digest = hashlib.sha512(h.hex.encode("utf-8") + DELIMITER + salt.value).hexdigest()
    return SaltedHash(digest)


def load_or_create_salt(path: str | Path | None = None) -> Salt:
    """Read the salt key file, creating it with fresh randomness on first use.

    Without an explicit path, the PINALITE_SALT_FILE environment variable
    names the file.
    """
    if path is None:
        env = os.environ.get(SALT_FILE_ENV)
        if not env:
            raise StateFileError(
                f"no salt file path given and {SALT_FILE_ENV} is not set")
        path = env
    path = Path(path)
    if path.exists():
        data = path.read_bytes()
        if len(data) != SALT_LENGTH:
            raise StateFileError(
                f"salt file {path} holds {len(data)} bytes, expected {SALT_LENGTH}")
        return Salt(data)
    data = secrets.token_bytes(SALT_LENGTH)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)
    try:
        os.chmod(path, 0o600)
    except OSError:
        pass
    return Salt(data)
