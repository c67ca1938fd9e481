"""Token auth over a static user table.

Users come from the config file as salted SHA-256 password hashes (a
plaintext ``password`` field is accepted for development and hashed at
load). Successful login issues an opaque expiring token.
"""
from __future__ import annotations

import hashlib
import secrets
import time
from dataclasses import dataclass

from ..errors import ValidationError


def hash_password(password: str, salt: str) -> str:
    return hashlib.sha256((salt + password).encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class User:
    username: str
    role: str
    salt: str
    password_sha256: str


class AuthError(Exception):
    """Missing, invalid, or expired credentials."""


class AuthManager:
    def __init__(self, users: list[dict], token_ttl_s: float = 8 * 3600):
        self.token_ttl_s = token_ttl_s
        self._users: dict[str, User] = {}
        self._tokens: dict[str, tuple[str, float]] = {}  # token -> (user, expiry)
        for entry in users:
            username = entry.get("username")
            if not username:
                raise ValidationError("auth user entry needs a username")
            role = entry.get("role", "annotator")
            if "password_sha256" in entry:
                salt = entry.get("salt", "")
                digest = entry["password_sha256"]
            elif "password" in entry:
                salt = secrets.token_hex(8)
                digest = hash_password(entry["password"], salt)
            else:
                raise ValidationError(
                    f"user {username!r} needs password or password_sha256"
                )
            self._users[username] = User(username, role, salt, digest)

    def login(self, username: str, password: str) -> str:
        user = self._users.get(username)
        if user is None or hash_password(password, user.salt) != user.password_sha256:
            raise AuthError("invalid credentials")
        token = secrets.token_hex(16)
        self._tokens[token] = (username, time.time() + self.token_ttl_s)
        return token

    def authenticate(self, token: str | None) -> User:
        if not token:
            raise AuthError("missing token")
        entry = self._tokens.get(token)
        if entry is None:
            raise AuthError("unknown token")
        username, expiry = entry
        if time.time() > expiry:
            del self._tokens[token]
            raise AuthError("expired token")
        return self._users[username]
