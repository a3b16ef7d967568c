"""Static pickle stream scanning via opcode disassembly.

The stream is disassembled with pickletools and NEVER executed.  Flagging
is opcode-class based: every opcode able to import a global or call a
callable is Critical, regardless of which names it references.  Name
denylists are bypassable; opcode classes are not.
"""

from __future__ import annotations

import io
import pickletools
import zipfile
from pathlib import Path
from typing import Optional

from ..findings import Finding, Severity
from ..integrity import IoError

# Opcodes that import a module attribute onto the stack.
_IMPORT_OPS = frozenset({"GLOBAL", "STACK_GLOBAL", "INST"})
# Opcodes that call a callable already on the stack (or construct via one).
_CALL_OPS = frozenset({"REDUCE", "OBJ", "NEWOBJ", "NEWOBJ_EX"})
# String-pushing opcodes whose values can feed STACK_GLOBAL.
_STRING_OPS = frozenset(
    {"UNICODE", "BINUNICODE", "SHORT_BINUNICODE", "BINUNICODE8",
     "STRING", "BINSTRING", "SHORT_BINSTRING"}
)

_FIRST_BYTE_OPS = frozenset(code.encode("latin-1")[0] for code in pickletools.code2op)


class PickleScanError(Exception):
    pass


class TruncatedStream(PickleScanError):
    def __init__(self, offset: int):
        self.offset = offset
        super().__init__(f"pickle stream truncated at byte {offset}")


class NotAPickle(PickleScanError):
    pass


class CorruptZip(PickleScanError):
    pass


def scan_pickle_stream(data: bytes, path: str = "", member: Optional[str] = None) -> list[Finding]:
    if not data:
        raise TruncatedStream(0)
    if data[0] not in _FIRST_BYTE_OPS:
        raise NotAPickle(f"first byte 0x{data[0]:02x} is not a pickle opcode")

    findings: list[Finding] = []
    recent_strings: list[str] = []
    import_seen = False
    last_pos = 0

    def locus(pos: int) -> str:
        return f"{member}:{pos}" if member else str(pos)

    ops = pickletools.genops(io.BytesIO(data))
    while True:
        try:
            opcode, arg, pos = next(ops)
        except StopIteration:
            break
        except ValueError as exc:
            msg = str(exc)
            if "unknown" in msg:
                findings.append(
                    Finding(
                        id="pickle-unknown-opcode",
                        severity=Severity.WARN,
                        path=path,
                        reason="unknown opcode; scan stopped",
                        locus=locus(last_pos),
                        evidence={"detail": msg},
                    )
                )
                break
            raise TruncatedStream(last_pos) from exc
        if pos is not None:
            last_pos = pos
        name = opcode.name

        if name in _STRING_OPS and isinstance(arg, str):
            recent_strings.append(arg)

        if name in _IMPORT_OPS:
            import_seen = True
            if name == "STACK_GLOBAL":
                module, attr = "?", "?"
                if len(recent_strings) >= 2:
                    module, attr = recent_strings[-2], recent_strings[-1]
            else:
                parts = str(arg).split(" ", 1) if arg else []
                module = parts[0] if parts else "?"
                attr = parts[1] if len(parts) > 1 else "?"
            findings.append(
                Finding(
                    id="pickle-import-opcode",
                    severity=Severity.CRITICAL,
                    path=path,
                    reason=f"{name} imports {module}.{attr}",
                    threat_ref="2.1",
                    locus=locus(pos or 0),
                    evidence={"opcode": name, "module": module, "attr": attr},
                )
            )
        elif name in _CALL_OPS:
            import_seen = True
            findings.append(
                Finding(
                    id="pickle-call-opcode",
                    severity=Severity.CRITICAL,
                    path=path,
                    reason=f"{name} can invoke an arbitrary callable",
                    threat_ref="2.1",
                    locus=locus(pos or 0),
                    evidence={"opcode": name},
                )
            )
        elif name == "BUILD" and import_seen:
            findings.append(
                Finding(
                    id="pickle-build-after-import",
                    severity=Severity.CRITICAL,
                    path=path,
                    reason="BUILD after an import-capable opcode can reach __setstate__",
                    threat_ref="2.1",
                    locus=locus(pos or 0),
                    evidence={"opcode": name},
                )
            )
    return findings


def scan_pickle_container(path: Path) -> list[Finding]:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            head = fh.read(2)
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc

    if head == b"PK":
        try:
            zf = zipfile.ZipFile(path)
        except zipfile.BadZipFile as exc:
            raise CorruptZip(f"{path}: {exc}") from exc
        findings: list[Finding] = []
        with zf:
            members = [n for n in zf.namelist() if n.endswith(".pkl")]
            for member in sorted(members):
                # Read in memory only; nothing is extracted to disk.
                data = zf.read(member)
                findings.extend(scan_pickle_stream(data, path=path.name, member=member))
        if not members:
            findings.append(
                Finding(
                    id="zip-no-pickle-members",
                    severity=Severity.INFO,
                    path=path.name,
                    reason="no serialized code paths: archive has no .pkl members",
                )
            )
        return findings

    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(str(path), str(exc)) from exc
    return scan_pickle_stream(data, path=path.name)
