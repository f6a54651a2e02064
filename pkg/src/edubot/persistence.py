"""Durable storage: CSV exports, audit log, encrypted secrets, registry.

Layout under the service data directory::

    data/attendance/<session_id>.csv
    data/surveys/<survey_id>.csv
    logs/audit-YYYY-MM-DD.jsonl
    .secrets.json
    registry.json

All file writes go through a temp file and ``os.replace`` so a crash
never leaves a half-written file behind.
"""

from __future__ import annotations

import base64
import csv
import hashlib
import hmac
import json
import os
import secrets as pysecrets
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, List, Optional

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .core import (
    ApiKey,
    AttendanceSession,
    AuditEvent,
    EduBotError,
    InvalidInput,
    SurveyDefinition,
    SurveyResponse,
    isoformat,
)

ATTENDANCE_CSV_HEADER = ["session_id", "group_id", "code", "student_id",
                         "display_name", "checkin_ts"]
SURVEY_CSV_HEADER = ["survey_id", "question_index", "prompt", "student_id",
                     "response_type", "value", "ts"]


class SecretsAuthError(EduBotError):
    """The passphrase does not match the secrets file."""


class SecretsIntegrityError(EduBotError):
    """The secrets file failed authentication after a correct passphrase;
    its contents were altered or damaged."""


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# CSV exports
# ---------------------------------------------------------------------------

def export_attendance_csv(session: AttendanceSession, directory: Path) -> Path:
    """Write one closed (or open) session to ``<directory>/<id>.csv``."""
    path = Path(directory) / f"{session.id}.csv"
    rows = [
        [session.id, session.group_id, session.code, c.student_id,
         c.display_name, isoformat(c.at)]
        for c in session.checkins
    ]
    _write_csv(path, ATTENDANCE_CSV_HEADER, rows)
    return path


def export_survey_csv(survey: SurveyDefinition, responses: Iterable[SurveyResponse],
                      directory: Path) -> Path:
    path = Path(directory) / f"{survey.id}.csv"
    rows = []
    for r in responses:
        prompt = survey.question(r.question_index).prompt
        rows.append([survey.id, str(r.question_index), prompt, r.student_id,
                     r.response_type.value, str(r.value), isoformat(r.at)])
    _write_csv(path, SURVEY_CSV_HEADER, rows)
    return path


def _write_csv(path: Path, header: List[str], rows: List[List[str]]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)
    os.replace(tmp, path)


def read_csv_rows(path: Path) -> List[dict]:
    """Read any of our CSV exports back into dict rows."""
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# Audit log
# ---------------------------------------------------------------------------

#: Any parameter whose (lowercased) key contains one of these substrings is
#: replaced with a placeholder before hitting disk.
REDACTED_MARKERS = ("token", "key", "secret", "passphrase", "password")
REDACTED = "[REDACTED]"


def redact_params(params: dict) -> dict:
    out = {}
    for k, v in params.items():
        lowered = k.lower()
        if any(marker in lowered for marker in REDACTED_MARKERS):
            out[k] = REDACTED
        else:
            out[k] = str(v)
    return out


class AuditLog:
    """Append-only JSONL audit trail, one file per UTC day.

    Timestamps within one file never decrease: a late event is clamped
    up to the last timestamp written there. Appending must never take
    the service down, so I/O errors are swallowed (callers can check
    :attr:`dropped` in tests).
    """

    def __init__(self, directory: Path):
        self.directory = Path(directory)
        self._lock = threading.Lock()
        self._last_ts: dict = {}  # filename -> datetime
        self.dropped = 0

    def append(self, event: AuditEvent) -> None:
        try:
            with self._lock:
                ts = event.ts.astimezone(timezone.utc)
                name = f"audit-{ts.date().isoformat()}.jsonl"
                last = self._last_ts.get(name)
                if last is not None and ts < last:
                    ts = last
                self._last_ts[name] = ts
                record = {
                    "ts": isoformat(ts),
                    "actor": event.actor,
                    "action": event.action,
                    "params": redact_params(event.params),
                    "outcome": event.outcome.value,
                    "detail": event.detail,
                }
                self.directory.mkdir(parents=True, exist_ok=True)
                with open(self.directory / name, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(record, sort_keys=True) + "\n")
        except Exception:
            self.dropped += 1

    def files(self) -> List[Path]:
        if not self.directory.exists():
            return []
        return sorted(self.directory.glob("audit-*.jsonl"))

    def iter_events(self) -> Iterator[dict]:
        for path in self.files():
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if line:
                        yield json.loads(line)


# ---------------------------------------------------------------------------
# Encrypted secrets
# ---------------------------------------------------------------------------

_SCRYPT_N = 2 ** 14
_SCRYPT_R = 8
_SCRYPT_P = 1
_KDF_LEN = 48  # 32 bytes AES key + 16 bytes passphrase verifier


def _derive(passphrase: str, salt: bytes) -> tuple:
    material = hashlib.scrypt(
        passphrase.encode("utf-8"), salt=salt,
        n=_SCRYPT_N, r=_SCRYPT_R, p=_SCRYPT_P, dklen=_KDF_LEN,
    )
    return material[:32], material[32:]


def _b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def _unb64(data: str) -> bytes:
    return base64.b64decode(data.encode("ascii"))


class SecretsStore:
    """Bot tokens and API-key hashes, encrypted at rest.

    The whole entry map is one AES-GCM blob under a scrypt-derived key.
    A separate verifier derived from the same passphrase tells a wrong
    passphrase (:class:`SecretsAuthError`) apart from a damaged file
    (:class:`SecretsIntegrityError`).
    """

    def __init__(self, path: Path, passphrase: str):
        if not passphrase:
            raise InvalidInput("secrets passphrase must be non-empty")
        self.path = Path(path)
        self._passphrase = passphrase
        self._lock = threading.Lock()

    def save(self, entries: dict) -> None:
        with self._lock:
            salt = pysecrets.token_bytes(16)
            key, verifier = _derive(self._passphrase, salt)
            nonce = pysecrets.token_bytes(12)
            plaintext = json.dumps(entries, sort_keys=True).encode("utf-8")
            ciphertext = AESGCM(key).encrypt(nonce, plaintext, salt)
            payload = {
                "version": 1,
                "kdf": {"name": "scrypt", "n": _SCRYPT_N, "r": _SCRYPT_R,
                        "p": _SCRYPT_P},
                "salt": _b64(salt),
                "verifier": _b64(verifier),
                "nonce": _b64(nonce),
                "ciphertext": _b64(ciphertext),
            }
            _atomic_write(self.path, (json.dumps(payload, indent=2) + "\n").encode("utf-8"))

    def load(self) -> dict:
        with self._lock:
            if not self.path.exists():
                return {}
            try:
                payload = json.loads(self.path.read_text(encoding="utf-8"))
                salt = _unb64(payload["salt"])
                stored_verifier = _unb64(payload["verifier"])
                nonce = _unb64(payload["nonce"])
                ciphertext = _unb64(payload["ciphertext"])
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise SecretsIntegrityError(f"secrets file unreadable: {exc}") from None
            key, verifier = _derive(self._passphrase, salt)
            if not hmac.compare_digest(verifier, stored_verifier):
                raise SecretsAuthError("passphrase does not match the secrets file")
            try:
                plaintext = AESGCM(key).decrypt(nonce, ciphertext, salt)
            except InvalidTag:
                raise SecretsIntegrityError(
                    "secrets file failed authentication; contents altered"
                ) from None
            return json.loads(plaintext.decode("utf-8"))

    def update(self, **changes) -> dict:
        """Read-modify-write helper; None values delete entries."""
        entries = self.load()
        for k, v in changes.items():
            if v is None:
                entries.pop(k, None)
            else:
                entries[k] = v
        self.save(entries)
        return entries


# ---------------------------------------------------------------------------
# API keys
# ---------------------------------------------------------------------------

def new_api_key(label: str) -> tuple:
    """Mint a credential; returns (ApiKey record, full bearer string).

    Only the salted hash is stored; the full ``key_id.secret`` string is
    shown once and cannot be recovered.
    """
    key_id = "k" + pysecrets.token_hex(4)
    secret = pysecrets.token_urlsafe(24)
    record = ApiKey(key_id=key_id, secret_hash=hash_api_secret(secret), label=label)
    return record, f"{key_id}.{secret}"


def hash_api_secret(secret: str, salt: Optional[bytes] = None) -> str:
    if salt is None:
        salt = pysecrets.token_bytes(16)
    digest = hashlib.sha256(salt + secret.encode("utf-8")).hexdigest()
    return f"{salt.hex()}${digest}"


def verify_api_secret(stored: str, candidate: str) -> bool:
    try:
        salt_hex, digest = stored.split("$", 1)
        salt = bytes.fromhex(salt_hex)
    except ValueError:
        return False
    expected = hashlib.sha256(salt + candidate.encode("utf-8")).hexdigest()
    return hmac.compare_digest(expected, digest)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

class RegistryStore:
    """The whole non-secret service state as one canonical JSON file.

    Canonical means sorted keys and fixed separators, so two runs that
    end in the same state write byte-identical files.
    """

    def __init__(self, path: Path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def save(self, state: dict) -> None:
        data = json.dumps(state, sort_keys=True, indent=2,
                          separators=(",", ": ")) + "\n"
        with self._lock:
            _atomic_write(self.path, data.encode("utf-8"))

    def load(self) -> Optional[dict]:
        with self._lock:
            if not self.path.exists():
                return None
            return json.loads(self.path.read_text(encoding="utf-8"))
