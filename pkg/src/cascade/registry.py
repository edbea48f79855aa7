"""File-backed, content-addressed store of validated safety cases.

Layout under the registry root::

    index.json                      array of records, stable key order
    objects/ab/<hash>.casl          canonical CASL text
    objects/ab/<hash>.report.json   validation report sidecar
    .lock                           advisory writer lock

Writes go to a temp file in the target directory and are renamed into place.
"""

from __future__ import annotations

import contextlib
import dataclasses
import fcntl
import hashlib
import json
import os
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterator, Optional, Union

from . import casl
from .model import SafetyCase
from .validator import ValidationReport

STATUS_OK = "ok"
STATUS_QUARANTINED = "quarantined"


class RegistryError(Exception):
    pass


class HashMismatch(RegistryError):
    pass


class StoreIO(RegistryError):
    pass


class NotFound(RegistryError):
    pass


class CorruptObject(RegistryError):
    pass


class BrokenChain(RegistryError):
    pass


class FailedValidation(RegistryError):
    """Report did not pass and quarantine was not requested."""


class UnknownPredecessor(RegistryError):
    pass


@dataclasses.dataclass(frozen=True)
class RegistryRecord:
    content_hash: str
    case_id: str
    version: int
    stored_at: str
    validation: ValidationReport
    predecessor: Optional[str] = None
    status: str = STATUS_OK

    def to_dict(self) -> dict:
        return {
            "content_hash": self.content_hash,
            "case_id": self.case_id,
            "version": self.version,
            "stored_at": self.stored_at,
            "predecessor": self.predecessor,
            "status": self.status,
            "validation": self.validation.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RegistryRecord":
        return cls(
            content_hash=d["content_hash"],
            case_id=d["case_id"],
            version=int(d["version"]),
            stored_at=d["stored_at"],
            validation=ValidationReport.from_dict(d["validation"]),
            predecessor=d.get("predecessor"),
            status=d.get("status", STATUS_OK),
        )


@dataclasses.dataclass(frozen=True)
class CaseDiff:
    added: tuple[str, ...] = ()
    removed: tuple[str, ...] = ()
    modified: tuple[tuple[str, tuple[str, ...]], ...] = ()
    meta_changes: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return not (self.added or self.removed or self.modified or self.meta_changes)

    def to_dict(self) -> dict:
        return {
            "added": list(self.added),
            "removed": list(self.removed),
            "modified": [{"node": n, "fields": list(f)} for n, f in self.modified],
            "meta_changes": list(self.meta_changes),
        }


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


_META_FIELDS = ("case_id", "title", "version", "top_claim", "context", "controls", "predecessor", "composed_from")


def diff_cases(a: SafetyCase, b: SafetyCase) -> CaseDiff:
    ids_a, ids_b = set(a.nodes), set(b.nodes)
    modified = []
    for nid in sorted(ids_a & ids_b):
        na, nb = a.nodes[nid], b.nodes[nid]
        if type(na) is not type(nb):
            modified.append((nid, ("kind",)))
            continue
        changed = tuple(f.name for f in dataclasses.fields(na) if getattr(na, f.name) != getattr(nb, f.name))
        if changed:
            modified.append((nid, changed))
    meta = tuple(f for f in _META_FIELDS if getattr(a, f) != getattr(b, f))
    return CaseDiff(
        added=tuple(sorted(ids_b - ids_a)),
        removed=tuple(sorted(ids_a - ids_b)),
        modified=tuple(modified),
        meta_changes=meta,
    )


def _now() -> str:
    return datetime.now(timezone.utc).replace(microsecond=0).isoformat().replace("+00:00", "Z")


class Registry:
    def __init__(self, root: Union[str, os.PathLike]):
        self.root = Path(root)

    # -- paths ------------------------------------------------------------

    def _obj(self, h: str, suffix: str) -> Path:
        return self.root / "objects" / h[:2] / f"{h}{suffix}"

    @property
    def index_path(self) -> Path:
        return self.root / "index.json"

    # -- low level --------------------------------------------------------

    @contextlib.contextmanager
    def _locked(self) -> Iterator[None]:
        try:
            self.root.mkdir(parents=True, exist_ok=True)
            fh = open(self.root / ".lock", "a+")
        except OSError as exc:
            raise StoreIO(f"cannot open registry at {self.root}: {exc}") from exc
        with fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def _write_atomic(self, path: Path, data: str) -> None:
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
                fh.write(data)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except OSError as exc:
            raise StoreIO(f"write failed for {path}: {exc}") from exc

    def records(self) -> list[RegistryRecord]:
        if not self.index_path.exists():
            return []
        try:
            raw = json.loads(self.index_path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise StoreIO(f"unreadable index {self.index_path}: {exc}") from exc
        return [RegistryRecord.from_dict(d) for d in raw]

    def _write_index(self, records: list[RegistryRecord]) -> None:
        records = sorted(records, key=lambda r: (r.case_id, r.version, r.content_hash))
        self._write_atomic(self.index_path, json.dumps([r.to_dict() for r in records], indent=2, ensure_ascii=False) + "\n")

    def record(self, h: str) -> RegistryRecord:
        for r in self.records():
            if r.content_hash == h:
                return r
        raise NotFound(f"no record {h}")

    def resolve(self, prefix: str) -> str:
        """Expand an unambiguous hash prefix (at least 4 hex digits)."""
        if len(prefix) == 64:
            return prefix
        hits = [r.content_hash for r in self.records() if r.content_hash.startswith(prefix)] if len(prefix) >= 4 else []
        if len(hits) != 1:
            raise NotFound(f"hash prefix {prefix!r} matches {len(hits)} records")
        return hits[0]

    # -- operations -------------------------------------------------------

    def put(self, c: SafetyCase, report: ValidationReport, allow_failed: bool = False) -> str:
        """Store ``c`` with its report; returns the content hash.

        Re-putting identical content is a no-op. A failing report is refused
        unless ``allow_failed``, in which case the record is quarantined.
        """
        text = casl.serialize(c)
        h = content_hash(text)
        if report.case_hash != h:
            raise HashMismatch(f"report is for {report.case_hash[:12]}, case hashes to {h[:12]}")
        if not report.passed and not allow_failed:
            raise FailedValidation("validation failed; pass allow_failed to store as quarantined")
        with self._locked():
            records = self.records()
            if any(r.content_hash == h for r in records):
                return h
            if c.predecessor and not any(r.content_hash == c.predecessor for r in records):
                raise UnknownPredecessor(f"predecessor {c.predecessor[:12]} is not in the registry")
            self._write_atomic(self._obj(h, ".casl"), text)
            self._write_atomic(self._obj(h, ".report.json"), report.to_json())
            records.append(
                RegistryRecord(
                    content_hash=h,
                    case_id=c.case_id,
                    version=c.version,
                    stored_at=_now(),
                    validation=report,
                    predecessor=c.predecessor,
                    status=STATUS_OK if report.passed else STATUS_QUARANTINED,
                )
            )
            self._write_index(records)
        return h

    def get(self, h: str) -> tuple[SafetyCase, ValidationReport]:
        path = self._obj(h, ".casl")
        if len(h) != 64 or not path.exists():
            raise NotFound(f"no stored object {h}")
        try:
            data = path.read_bytes()
            report = ValidationReport.from_dict(json.loads(self._obj(h, ".report.json").read_text(encoding="utf-8")))
        except OSError as exc:
            raise StoreIO(str(exc)) from exc
        except ValueError as exc:
            raise CorruptObject(f"report sidecar for {h[:12]} unreadable: {exc}") from exc
        if hashlib.sha256(data).hexdigest() != h:
            raise CorruptObject(f"object {h[:12]} does not match its hash")
        try:
            return casl.parse(data.decode("utf-8")), report
        except (UnicodeDecodeError, casl.ParseError) as exc:
            raise CorruptObject(f"object {h[:12]} unparsable: {exc}") from exc

    def lineage(self, case_id: str) -> list[RegistryRecord]:
        recs = sorted((r for r in self.records() if r.case_id == case_id), key=lambda r: (r.version, r.stored_at))
        by_hash = {r.content_hash: r for r in self.records()}
        for r in recs:
            if not r.predecessor:
                continue
            prev = by_hash.get(r.predecessor)
            if prev is None or not self._obj(r.predecessor, ".casl").exists():
                raise BrokenChain(f"{case_id} v{r.version}: predecessor {r.predecessor[:12]} missing")
            if prev.version >= r.version:
                raise BrokenChain(
                    f"{case_id} v{r.version}: predecessor has version {prev.version}, not lower"
                )
        return recs

    def diff(self, hash_a: str, hash_b: str) -> CaseDiff:
        a, _ = self.get(hash_a)
        b, _ = self.get(hash_b)
        return diff_cases(a, b)

    def verify(self) -> list[str]:
        """Hashes of records whose stored object no longer matches."""
        bad = []
        for r in self.records():
            try:
                self.get(r.content_hash)
            except RegistryError:
                bad.append(r.content_hash)
        return bad
