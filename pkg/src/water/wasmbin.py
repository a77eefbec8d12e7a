"""Just enough of the WebAssembly binary format to list imports and exports
with their function signatures, without instantiating anything."""

from __future__ import annotations

from dataclasses import dataclass, field

from .abi import ExportSig, FuncSig

MAGIC = b"\x00asm"
VERSION = b"\x01\x00\x00\x00"

_VALTYPES = {0x7F: "i32", 0x7E: "i64", 0x7D: "f32", 0x7C: "f64", 0x7B: "v128",
             0x70: "funcref", 0x6F: "externref"}
_KINDS = {0: "func", 1: "table", 2: "memory", 3: "global"}

SEC_TYPE, SEC_IMPORT, SEC_FUNCTION, SEC_EXPORT = 1, 2, 3, 7


class WasmFormatError(ValueError):
    pass


@dataclass(frozen=True)
class ImportSig:
    module: str
    name: str
    kind: str
    sig: FuncSig | None = None


@dataclass
class ModuleInfo:
    imports: list = field(default_factory=list)
    exports: list = field(default_factory=list)

    def export_names(self):
        return {e.name for e in self.exports}


class _Reader:
    def __init__(self, data, pos=0, end=None):
        self.data = data
        self.pos = pos
        self.end = len(data) if end is None else end

    def byte(self):
        if self.pos >= self.end:
            raise WasmFormatError("unexpected end of data")
        b = self.data[self.pos]
        self.pos += 1
        return b

    def u32(self):
        result = shift = 0
        while True:
            b = self.byte()
            result |= (b & 0x7F) << shift
            if not b & 0x80:
                break
            shift += 7
            if shift > 35:
                raise WasmFormatError("LEB128 too long")
        if result > 0xFFFFFFFF:
            raise WasmFormatError("u32 out of range")
        return result

    def bytes(self, n):
        if self.pos + n > self.end:
            raise WasmFormatError("unexpected end of data")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return bytes(out)

    def name(self):
        raw = self.bytes(self.u32())
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise WasmFormatError("name is not UTF-8") from exc

    def valtype(self):
        b = self.byte()
        if b not in _VALTYPES:
            raise WasmFormatError(f"unknown value type 0x{b:02x}")
        return _VALTYPES[b]

    def limits(self):
        flags = self.byte()
        self.u32()
        if flags & 1:
            self.u32()


def _functype(r):
    if r.byte() != 0x60:
        raise WasmFormatError("expected function type")
    params = tuple(r.valtype() for _ in range(r.u32()))
    results = tuple(r.valtype() for _ in range(r.u32()))
    return FuncSig(params, results)


def parse_module(data) -> ModuleInfo:
    """Read the type, import, function and export sections of ``data``."""
    if len(data) < 8 or data[:4] != MAGIC:
        raise WasmFormatError("bad magic number")
    if data[4:8] != VERSION:
        raise WasmFormatError("unsupported binary version")

    types, func_types = [], []
    info = ModuleInfo()
    raw_exports = []
    r = _Reader(data, 8)
    while r.pos < r.end:
        sec_id = r.byte()
        size = r.u32()
        if r.pos + size > r.end:
            raise WasmFormatError(f"section {sec_id} overruns module")
        s = _Reader(data, r.pos, r.pos + size)
        r.pos += size
        if sec_id == SEC_TYPE:
            types = [_functype(s) for _ in range(s.u32())]
        elif sec_id == SEC_IMPORT:
            for _ in range(s.u32()):
                mod, name, kind = s.name(), s.name(), s.byte()
                sig = None
                if kind == 0:
                    idx = s.u32()
                    if idx >= len(types):
                        raise WasmFormatError("import type index out of range")
                    sig = types[idx]
                    func_types.append(sig)
                elif kind == 1:
                    s.byte()
                    s.limits()
                elif kind == 2:
                    s.limits()
                elif kind == 3:
                    s.valtype()
                    s.byte()
                else:
                    raise WasmFormatError(f"unknown import kind {kind}")
                info.imports.append(ImportSig(mod, name, _KINDS[kind], sig))
        elif sec_id == SEC_FUNCTION:
            for _ in range(s.u32()):
                idx = s.u32()
                if idx >= len(types):
                    raise WasmFormatError("function type index out of range")
                func_types.append(types[idx])
        elif sec_id == SEC_EXPORT:
            for _ in range(s.u32()):
                name, kind, idx = s.name(), s.byte(), s.u32()
                if kind not in _KINDS:
                    raise WasmFormatError(f"unknown export kind {kind}")
                raw_exports.append((name, _KINDS[kind], idx))
        elif sec_id > 12:
            raise WasmFormatError(f"unknown section id {sec_id}")

    for name, kind, idx in raw_exports:
        sig = None
        if kind == "func":
            if idx >= len(func_types):
                raise WasmFormatError(f"export {name!r} references missing function")
            sig = func_types[idx]
        info.exports.append(ExportSig(name, kind, sig))
    return info
