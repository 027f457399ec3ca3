"""LSP base-protocol plumbing: message framing, id correlation, position encoding.

Everything here is bit-exact: bodies are UTF-8 JSON, headers count bytes,
and positions use 0-based lines with UTF-16 code-unit columns (the LSP
default encoding; no negotiation of alternatives).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Optional

JSONRPC_VERSION = "2.0"

HEADER_TERMINATOR = b"\r\n\r\n"


class FramingError(Exception):
    """Raised when the byte stream violates the base protocol framing."""


class OutOfBounds(ValueError):
    """Position or byte offset outside the document."""


class MessageKind(Enum):
    REQUEST = "request"
    NOTIFICATION = "notification"
    RESPONSE = "response"
    ERROR = "error"


@dataclass
class WireMessage:
    """One JSON-RPC message as it appears on the wire.

    ``method`` is empty for responses/errors; ``msg_id`` is None for
    notifications.  ``payload`` holds params (requests/notifications),
    result (responses) or the error object (errors).
    """

    kind: MessageKind
    method: str = ""
    msg_id: Optional[int] = None
    payload: Any = None

    def to_obj(self) -> dict:
        obj: dict[str, Any] = {"jsonrpc": JSONRPC_VERSION}
        if self.kind is MessageKind.REQUEST:
            obj["id"] = self.msg_id
            obj["method"] = self.method
            if self.payload is not None:
                obj["params"] = self.payload
        elif self.kind is MessageKind.NOTIFICATION:
            obj["method"] = self.method
            if self.payload is not None:
                obj["params"] = self.payload
        elif self.kind is MessageKind.RESPONSE:
            obj["id"] = self.msg_id
            obj["result"] = self.payload
        else:
            obj["id"] = self.msg_id
            obj["error"] = self.payload
        return obj

    @classmethod
    def from_obj(cls, obj: dict) -> "WireMessage":
        if not isinstance(obj, dict):
            raise FramingError("message body is not an object")
        msg_id = obj.get("id")
        if "method" in obj:
            if msg_id is not None:
                return cls(MessageKind.REQUEST, obj["method"], msg_id, obj.get("params"))
            return cls(MessageKind.NOTIFICATION, obj["method"], None, obj.get("params"))
        if "error" in obj:
            return cls(MessageKind.ERROR, "", msg_id, obj["error"])
        return cls(MessageKind.RESPONSE, "", msg_id, obj.get("result"))


def frame(message: WireMessage) -> bytes:
    """Encode one message as ``Content-Length: N\\r\\n\\r\\n<body>``.

    N counts the UTF-8 bytes of the body, not its characters.
    """
    body = json.dumps(message.to_obj(), ensure_ascii=False, separators=(",", ":")).encode("utf-8")
    return b"Content-Length: " + str(len(body)).encode("ascii") + HEADER_TERMINATOR + body


def frame_stream(messages: list[WireMessage]) -> bytes:
    return b"".join(frame(m) for m in messages)


class StreamDecoder:
    """Incremental decoder for a framed byte stream.

    Feed arbitrary chunks; complete messages come out, a partial trailing
    message stays buffered.  Unknown headers (Content-Type, ...) are
    skipped; a malformed header line raises FramingError and the decoder
    is considered broken from then on.
    """

    def __init__(self) -> None:
        self._buf = bytearray()
        self.broken = False

    def feed(self, data: bytes) -> list[WireMessage]:
        if self.broken:
            raise FramingError("decoder already broken")
        self._buf.extend(data)
        out: list[WireMessage] = []
        while True:
            msg = self._next()
            if msg is None:
                break
            out.append(msg)
        return out

    @property
    def pending_bytes(self) -> int:
        return len(self._buf)

    def _next(self) -> Optional[WireMessage]:
        head_end = self._buf.find(HEADER_TERMINATOR)
        if head_end < 0:
            return None
        header_block = bytes(self._buf[:head_end])
        content_length: Optional[int] = None
        for raw_line in header_block.split(b"\r\n"):
            if not raw_line:
                continue
            name, sep, value = raw_line.partition(b":")
            if not sep:
                self.broken = True
                raise FramingError(f"malformed header line: {raw_line[:64]!r}")
            if name.strip().lower() == b"content-length":
                try:
                    content_length = int(value.strip())
                except ValueError:
                    self.broken = True
                    raise FramingError(f"non-numeric Content-Length: {value.strip()[:32]!r}")
        if content_length is None or content_length < 0:
            self.broken = True
            raise FramingError("missing Content-Length header")
        body_start = head_end + len(HEADER_TERMINATOR)
        if len(self._buf) < body_start + content_length:
            return None
        body = bytes(self._buf[body_start : body_start + content_length])
        del self._buf[: body_start + content_length]
        try:
            obj = json.loads(body.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            self.broken = True
            raise FramingError(f"undecodable body: {exc}")
        return WireMessage.from_obj(obj)


def unframe(data: bytes) -> list[WireMessage]:
    """Decode all complete framed messages in ``data``; trailing partials are ignored."""
    return StreamDecoder().feed(data)


# --- position encoding ----------------------------------------------------

@dataclass(frozen=True)
class DocumentPosition:
    """0-based line plus 0-based UTF-16 code-unit column."""

    line: int
    character: int

    def to_lsp(self) -> dict:
        return {"line": self.line, "character": self.character}

    @classmethod
    def from_lsp(cls, obj: dict) -> "DocumentPosition":
        return cls(int(obj["line"]), int(obj["character"]))


def split_lines(text: str) -> list[str]:
    """Lines of ``text`` split on ``\\n``, separators removed, last line kept even if empty."""
    return text.split("\n")


def utf16_len(s: str) -> int:
    return sum(2 if ord(ch) > 0xFFFF else 1 for ch in s)


def byte_to_position(text: str, byte_offset: int) -> DocumentPosition:
    """Map a UTF-8 byte offset (on a character boundary) to (line, UTF-16 column).

    Offsets equal to the document byte length map to the position just
    past the last character.
    """
    data = text.encode("utf-8")
    if byte_offset < 0 or byte_offset > len(data):
        raise OutOfBounds(f"byte offset {byte_offset} not in [0, {len(data)}]")
    prefix = data[:byte_offset]
    try:
        prefix_text = prefix.decode("utf-8")
    except UnicodeDecodeError:
        raise OutOfBounds(f"byte offset {byte_offset} splits a UTF-8 sequence")
    line = prefix_text.count("\n")
    last_nl = prefix_text.rfind("\n")
    column_text = prefix_text[last_nl + 1 :]
    return DocumentPosition(line, utf16_len(column_text))


def position_to_byte(text: str, pos: DocumentPosition) -> int:
    """Inverse of byte_to_position for in-bounds positions on code-point boundaries."""
    lines = split_lines(text)
    if pos.line < 0 or pos.line >= len(lines):
        raise OutOfBounds(f"line {pos.line} not in [0, {len(lines)})")
    line_text = lines[pos.line]
    if pos.character < 0 or pos.character > utf16_len(line_text):
        raise OutOfBounds(f"character {pos.character} beyond line of UTF-16 length {utf16_len(line_text)}")
    units = 0
    chars = 0
    for ch in line_text:
        if units >= pos.character:
            break
        units += 2 if ord(ch) > 0xFFFF else 1
        chars += 1
    if units != pos.character:
        raise OutOfBounds(f"character {pos.character} splits a surrogate pair")
    prefix = "\n".join(lines[: pos.line])
    if pos.line > 0:
        prefix += "\n"
    return len(prefix.encode("utf-8")) + len(line_text[:chars].encode("utf-8"))


def position_in_bounds(text: str, pos: DocumentPosition) -> bool:
    lines = split_lines(text)
    if pos.line < 0 or pos.line >= len(lines):
        return False
    return 0 <= pos.character <= utf16_len(lines[pos.line])


def line_count(text: str) -> int:
    return text.count("\n") + 1


# --- session construction -------------------------------------------------

# Minimal but honest client capabilities: the methods the dispatch catalog
# can emit, plus publishDiagnostics so servers send us diagnostics.
CLIENT_CAPABILITIES = {
    "textDocument": {
        "synchronization": {"didSave": False},
        "publishDiagnostics": {"relatedInformation": False},
        "hover": {},
        "completion": {"completionItem": {"snippetSupport": False}},
        "definition": {},
        "typeDefinition": {},
        "implementation": {},
        "references": {},
        "documentSymbol": {},
        "documentHighlight": {},
        "formatting": {},
        "rangeFormatting": {},
        "rename": {},
        "callHierarchy": {},
        "semanticTokens": {"requests": {"full": True}, "tokenTypes": [], "tokenModifiers": [], "formats": []},
        "foldingRange": {},
    },
    "workspace": {"symbol": {}, "workspaceFolders": False},
}


class IdAllocator:
    """Sequential request-id source; ids are unique per session, starting at 1."""

    def __init__(self) -> None:
        self._next = 1

    def allocate(self) -> int:
        value = self._next
        self._next += 1
        return value


def build_session_prelude(
    doc_uri: str, doc_text: str, language_id: str, ids: Optional[IdAllocator] = None
) -> list[WireMessage]:
    """initialize request, initialized notification, didOpen with the full text."""
    ids = ids or IdAllocator()
    return [
        WireMessage(
            MessageKind.REQUEST,
            "initialize",
            ids.allocate(),
            {
                "processId": None,
                "rootUri": None,
                "capabilities": CLIENT_CAPABILITIES,
            },
        ),
        WireMessage(MessageKind.NOTIFICATION, "initialized", None, {}),
        WireMessage(
            MessageKind.NOTIFICATION,
            "textDocument/didOpen",
            None,
            {
                "textDocument": {
                    "uri": doc_uri,
                    "languageId": language_id,
                    "version": 1,
                    "text": doc_text,
                }
            },
        ),
    ]


def build_session_coda(ids: IdAllocator) -> list[WireMessage]:
    """shutdown request followed by the exit notification."""
    return [
        WireMessage(MessageKind.REQUEST, "shutdown", ids.allocate(), None),
        WireMessage(MessageKind.NOTIFICATION, "exit", None, None),
    ]


@dataclass
class CapturedMessage:
    """A server-to-client message plus, for responses, the method of the request it answers."""

    message: WireMessage
    request_method: Optional[str] = None


class Correlator:
    """Tracks outstanding request ids so responses can be matched to their methods."""

    def __init__(self) -> None:
        self._outstanding: dict[int, str] = {}

    def sent(self, message: WireMessage) -> None:
        if message.kind is MessageKind.REQUEST and message.msg_id is not None:
            if message.msg_id in self._outstanding:
                raise FramingError(f"duplicate request id {message.msg_id}")
            self._outstanding[message.msg_id] = message.method

    def received(self, message: WireMessage) -> CapturedMessage:
        if message.kind in (MessageKind.RESPONSE, MessageKind.ERROR) and message.msg_id is not None:
            return CapturedMessage(message, self._outstanding.pop(message.msg_id, None))
        return CapturedMessage(message)

    @property
    def outstanding(self) -> dict[int, str]:
        return dict(self._outstanding)
