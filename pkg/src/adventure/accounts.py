"""Learner accounts and login tokens.

Accounts are pre-assigned (no self-registration): the admin CLI creates them
from a roster CSV. Mode assignment is immutable once the account exists.
Passwords are salted PBKDF2; session tokens are opaque and server-side only.
"""

from __future__ import annotations

import csv
import hashlib
import json
import secrets
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .session import Mode

_PBKDF2_ITERATIONS = 60_000


def hash_password(password: str, salt: Optional[str] = None) -> str:
    salt = salt or secrets.token_hex(8)
    digest = hashlib.pbkdf2_hmac(
        "sha256", password.encode("utf-8"), bytes.fromhex(salt), _PBKDF2_ITERATIONS
    )
    return f"{salt}${digest.hex()}"


def verify_password(password: str, stored: str) -> bool:
    salt, _ = stored.split("$", 1)
    return secrets.compare_digest(hash_password(password, salt), stored)


@dataclass
class Account:
    learner_id: str
    username: str
    password_hash: str
    mode: Mode
    locale: str = "en"


class AccountStore:
    """username -> account, persisted as one JSON file in the data directory."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.accounts: dict[str, Account] = {}
        if self.path.exists():
            doc = json.loads(self.path.read_text(encoding="utf-8"))
            for obj in doc["accounts"]:
                account = Account(
                    learner_id=obj["learner_id"],
                    username=obj["username"],
                    password_hash=obj["password_hash"],
                    mode=Mode(obj["mode"]),
                    locale=obj.get("locale", "en"),
                )
                self.accounts[account.username] = account

    def _save_locked(self) -> None:
        doc = {
            "accounts": [
                {
                    "learner_id": a.learner_id,
                    "username": a.username,
                    "password_hash": a.password_hash,
                    "mode": a.mode.value,
                    "locale": a.locale,
                }
                for a in sorted(self.accounts.values(), key=lambda a: a.username)
            ]
        }
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")

    def create(self, username: str, password: str, mode: Mode, locale: str = "en") -> Account:
        with self._lock:
            if username in self.accounts:
                raise ValueError(f"username {username!r} already exists")
            learner_id = f"u{len(self.accounts) + 1:04d}"
            account = Account(
                learner_id=learner_id,
                username=username,
                password_hash=hash_password(password),
                mode=mode,
                locale=locale,
            )
            self.accounts[username] = account
            self._save_locked()
            return account

    def authenticate(self, username: str, password: str) -> Optional[Account]:
        account = self.accounts.get(username)
        if account is None or not verify_password(password, account.password_hash):
            return None
        return account

    def by_learner_id(self, learner_id: str) -> Optional[Account]:
        for account in self.accounts.values():
            if account.learner_id == learner_id:
                return account
        return None

    def load_roster_csv(self, path: str | Path) -> list[Account]:
        """Rows: username,password,mode[,locale]; mode is adaptive/genai/hybrid."""
        created = []
        with open(path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                created.append(
                    self.create(
                        username=row["username"].strip(),
                        password=row["password"],
                        mode=Mode(row["mode"].strip().lower()),
                        locale=row.get("locale", "en").strip() or "en",
                    )
                )
        return created


class TokenStore:
    """Opaque bearer tokens issued at login, kept server-side only."""

    def __init__(self):
        self._lock = threading.Lock()
        self._tokens: dict[str, str] = {}

    def issue(self, learner_id: str) -> str:
        token = secrets.token_hex(16)
        with self._lock:
            self._tokens[token] = learner_id
        return token

    def learner_for(self, token: str) -> Optional[str]:
        with self._lock:
            return self._tokens.get(token)
