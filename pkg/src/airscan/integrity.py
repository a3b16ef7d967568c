"""Release integrity: hash manifests, directory Merkle roots, fingerprints.

Everything here is SHA-256.  Files are hashed in bounded-memory chunks so
multi-GiB shards never load whole.  Symlinks are resolved but a link whose
target escapes the scanned root is an error, never a silent read.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Any, Callable, Iterator, Optional

CHUNK_SIZE = 1024 * 1024
MERKLE_CONSTRUCTION_ID = "airs-merkle-v1"

_HEX64_RE = re.compile(r"^[0-9a-f]{64}$")

# Scanner outputs living inside the model directory are not release content.
DEFAULT_EXCLUDE_SUFFIXES = (".manifest.json", ".airs.json")


class IntegrityError(Exception):
    pass


class IoError(IntegrityError):
    def __init__(self, path: str, detail: str = ""):
        self.path = path
        super().__init__(f"cannot read {path}" + (f": {detail}" if detail else ""))


class SymlinkEscape(IntegrityError):
    def __init__(self, path: str):
        self.path = path
        super().__init__(f"symlink escapes scan root: {path}")


class EmptyManifest(IntegrityError):
    pass


class ParseError(IntegrityError):
    def __init__(self, path: str, detail: str = ""):
        self.path = path
        super().__init__(f"cannot parse {path}" + (f": {detail}" if detail else ""))


class NoTokenizerFound(IntegrityError):
    pass


class FingerprintKind(str, Enum):
    CONFIG = "Config"
    TOKENIZER_VOCAB = "TokenizerVocab"
    TOKENIZER_MERGES = "TokenizerMerges"
    FAMILY = "Family"


@dataclass(frozen=True)
class ManifestEntry:
    relative_path: str
    size_bytes: int
    sha256: str

    def __post_init__(self) -> None:
        if self.size_bytes < 0:
            raise ValueError(f"negative size for {self.relative_path}")
        if not _HEX64_RE.match(self.sha256):
            raise ValueError(f"bad digest for {self.relative_path}: {self.sha256!r}")


@dataclass(frozen=True)
class HashManifest:
    entries: tuple[ManifestEntry, ...]
    root_dir: str = ""

    def __post_init__(self) -> None:
        paths = [e.relative_path for e in self.entries]
        if paths != sorted(paths):
            raise ValueError("manifest entries must be sorted by path")
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths must be unique")

    def digest_for(self, relative_path: str) -> Optional[str]:
        for e in self.entries:
            if e.relative_path == relative_path:
                return e.sha256
        return None

    def to_json_list(self) -> list[dict[str, Any]]:
        return [
            {"path": e.relative_path, "size": e.size_bytes, "sha256": e.sha256}
            for e in self.entries
        ]


@dataclass(frozen=True)
class MerkleRoot:
    root: str
    leaf_count: int
    construction_id: str = MERKLE_CONSTRUCTION_ID

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "root": self.root,
            "leaf_count": self.leaf_count,
            "construction_id": self.construction_id,
        }


@dataclass(frozen=True)
class Fingerprint:
    kind: FingerprintKind
    sha256: str
    source_files: tuple[str, ...]

    def __post_init__(self) -> None:
        if not self.source_files:
            raise ValueError("fingerprint needs at least one source file")

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind.value,
            "sha256": self.sha256,
            "source_files": list(self.source_files),
        }


@dataclass(frozen=True)
class VerifyReport:
    matched: tuple[str, ...]
    mismatched: tuple[dict[str, str], ...]
    missing: tuple[str, ...]
    extra: tuple[str, ...]

    @property
    def verdict(self) -> str:
        ok = not self.mismatched and not self.missing and not self.extra
        return "Match" if ok else "Mismatch"

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "matched": list(self.matched),
            "mismatched": list(self.mismatched),
            "missing": list(self.missing),
            "extra": list(self.extra),
            "verdict": self.verdict,
        }


def default_include(relative_path: str) -> bool:
    return not relative_path.endswith(DEFAULT_EXCLUDE_SUFFIXES)


def hash_file(path: Path) -> str:
    h = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            while True:
                chunk = fh.read(CHUNK_SIZE)
                if not chunk:
                    break
                h.update(chunk)
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc
    return h.hexdigest()


def find_symlink_escapes(root: Path) -> list[str]:
    """Relative paths of links whose resolved target leaves the root."""
    root = Path(root)
    resolved_root = root.resolve()
    escapes: list[str] = []
    for dirpath, dirnames, filenames in os.walk(root, followlinks=False):
        for name in sorted(dirnames) + sorted(filenames):
            p = Path(dirpath) / name
            if not p.is_symlink():
                continue
            try:
                target = p.resolve(strict=True)
            except OSError:
                escapes.append(p.relative_to(root).as_posix())
                continue
            if not target.is_relative_to(resolved_root):
                escapes.append(p.relative_to(root).as_posix())
    return sorted(escapes)


def iter_regular_files(root: Path) -> Iterator[tuple[str, Path]]:
    resolved_root = root.resolve()
    for dirpath, dirnames, filenames in os.walk(root, followlinks=False):
        dirnames.sort()
        for name in dirnames:
            p = Path(dirpath) / name
            if p.is_symlink():
                target = p.resolve()
                if not target.is_relative_to(resolved_root):
                    raise SymlinkEscape(p.relative_to(root).as_posix())
        for name in sorted(filenames):
            p = Path(dirpath) / name
            rel = p.relative_to(root).as_posix()
            if p.is_symlink():
                try:
                    target = p.resolve(strict=True)
                except OSError as exc:
                    raise IoError(rel, "broken symlink") from exc
                if not target.is_relative_to(resolved_root):
                    raise SymlinkEscape(rel)
                yield rel, target
            elif p.is_file():
                yield rel, p


def build_manifest(
    root: Path,
    include_filter: Callable[[str], bool] = default_include,
) -> HashManifest:
    root = Path(root)
    if not root.is_dir():
        raise IoError(str(root), "not a directory")
    entries: list[ManifestEntry] = []
    for rel, real in iter_regular_files(root):
        if not include_filter(rel):
            continue
        entries.append(ManifestEntry(rel, real.stat().st_size, hash_file(real)))
    entries.sort(key=lambda e: e.relative_path)
    return HashManifest(tuple(entries), root_dir=root.name)


def verify_manifest(
    root: Path,
    manifest: HashManifest,
    include_filter: Callable[[str], bool] = default_include,
) -> VerifyReport:
    root = Path(root)
    on_disk: dict[str, Path] = {
        rel: real for rel, real in iter_regular_files(root) if include_filter(rel)
    }
    expected = {e.relative_path: e.sha256 for e in manifest.entries}
    matched: list[str] = []
    mismatched: list[dict[str, str]] = []
    missing: list[str] = []
    for rel in sorted(expected):
        if rel not in on_disk:
            missing.append(rel)
            continue
        actual = hash_file(on_disk[rel])
        if actual == expected[rel]:
            matched.append(rel)
        else:
            mismatched.append({"path": rel, "expected": expected[rel], "actual": actual})
    extra = sorted(rel for rel in on_disk if rel not in expected)
    return VerifyReport(tuple(matched), tuple(mismatched), tuple(missing), tuple(extra))


def merkle_root(manifest: HashManifest) -> MerkleRoot:
    if not manifest.entries:
        raise EmptyManifest("merkle root needs at least one entry")
    level = [
        hashlib.sha256(
            e.relative_path.encode("utf-8") + b"\x00" + bytes.fromhex(e.sha256)
        ).digest()
        for e in manifest.entries
    ]
    leaf_count = len(level)
    while len(level) > 1:
        nxt: list[bytes] = []
        for i in range(0, len(level) - 1, 2):
            nxt.append(hashlib.sha256(level[i] + level[i + 1]).digest())
        if len(level) % 2 == 1:
            nxt.append(level[-1])
        level = nxt
    return MerkleRoot(level[0].hex(), leaf_count)


def _canonical_file_bytes(path: Path) -> bytes:
    # JSON files are reduced to sorted-key compact form so formatting noise
    # never changes a fingerprint; everything else is hashed raw.
    if path.suffix.lower() == ".json":
        try:
            parsed = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, UnicodeDecodeError) as exc:
            raise IoError(str(path), str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise ParseError(str(path), str(exc)) from exc
        return json.dumps(
            parsed, sort_keys=True, separators=(",", ":"), ensure_ascii=False
        ).encode("utf-8")
    try:
        return path.read_bytes()
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc


def fingerprint_config(config_files: list[Path]) -> Fingerprint:
    if not config_files:
        raise ValueError("no config files given")
    ordered = sorted(Path(p) for p in config_files)
    h = hashlib.sha256()
    for path in ordered:
        h.update(_canonical_file_bytes(path))
    return Fingerprint(
        FingerprintKind.CONFIG, h.hexdigest(), tuple(p.name for p in ordered)
    )


_TOKENIZER_KINDS: tuple[tuple[str, FingerprintKind], ...] = (
    ("vocab.json", FingerprintKind.TOKENIZER_VOCAB),
    ("tokenizer.json", FingerprintKind.TOKENIZER_VOCAB),
    ("tokenizer.model", FingerprintKind.TOKENIZER_VOCAB),
    ("merges.txt", FingerprintKind.TOKENIZER_MERGES),
)


def fingerprint_tokenizer(tokenizer_files: list[Path]) -> list[Fingerprint]:
    by_kind: dict[FingerprintKind, list[Path]] = {}
    for raw in tokenizer_files:
        path = Path(raw)
        for name, kind in _TOKENIZER_KINDS:
            if path.name == name:
                by_kind.setdefault(kind, []).append(path)
                break
    if not by_kind:
        raise NoTokenizerFound("no vocab/merges/tokenizer definition files given")
    out: list[Fingerprint] = []
    for kind in (FingerprintKind.TOKENIZER_VOCAB, FingerprintKind.TOKENIZER_MERGES):
        if kind not in by_kind:
            continue
        ordered = sorted(by_kind[kind])
        h = hashlib.sha256()
        for path in ordered:
            h.update(_canonical_file_bytes(path))
        out.append(Fingerprint(kind, h.hexdigest(), tuple(p.name for p in ordered)))
    return out


def match_family(fingerprint: Fingerprint, registry: dict[str, list[str]]) -> Optional[str]:
    """Look a config fingerprint up in a name -> known-digests registry."""
    for family, digests in sorted(registry.items()):
        if fingerprint.sha256 in digests:
            return family
    return None


def save_manifest(manifest: HashManifest, path: Path) -> None:
    Path(path).write_text(
        json.dumps(manifest.to_json_list(), indent=2) + "\n", encoding="utf-8"
    )


def load_manifest(path: Path, root_dir: str = "") -> HashManifest:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), str(exc)) from exc
    if not isinstance(raw, list):
        raise ParseError(str(path), "manifest must be a JSON array")
    entries = []
    for item in raw:
        try:
            entries.append(ManifestEntry(item["path"], item["size"], item["sha256"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(str(path), f"bad entry: {exc}") from exc
    entries.sort(key=lambda e: e.relative_path)
    return HashManifest(tuple(entries), root_dir=root_dir)
