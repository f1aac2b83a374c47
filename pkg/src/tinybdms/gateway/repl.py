"""Interactive shell over an embedded instance or a remote server.

Statements end with ``;`` and may span lines. Meta-commands (one per line):
``\\dv`` dataverses, ``\\ds`` datasets, ``\\df`` functions, ``\\explain on|off``,
``\\quit``. End of input also quits.
"""

from __future__ import annotations

import uuid

from ..errors import TinyBdmsError
from .server import SESSION_HEADER, error_payload, render

PROMPT, MORE = "tinybdms> ", "      ... "

LIST_DATAVERSES = "for $d in dataset Metadata.Dataverse order by $d.DataverseName return $d.DataverseName;"
LIST_DATASETS = ("for $d in dataset Metadata.Dataset where $d.DataverseName != \"Metadata\" "
                 "order by $d.DataverseName, $d.Name "
                 "return {\"dataverse\": $d.DataverseName, \"dataset\": $d.Name, \"kind\": $d.DatasetType};")
LIST_FUNCTIONS = ("for $f in dataset Metadata.Function order by $f.DataverseName, $f.Name "
                  "return {\"dataverse\": $f.DataverseName, \"name\": $f.Name, \"params\": $f.Params};")


class ReplError(Exception):
    pass


class EmbeddedBackend:
    def __init__(self, instance):
        self.instance = instance
        self.session = instance.session()

    def execute(self, text: str, explain: bool = False) -> str:
        try:
            return render(self.instance.execute(text, self.session, explain=explain), explain)
        except TinyBdmsError as e:
            _code, body = error_payload(e, text)
            raise ReplError(_format(body)) from None


class RemoteBackend:
    def __init__(self, url: str, timeout: float = 600.0):
        import httpx

        self.client = httpx.Client(base_url=url.rstrip("/"), timeout=timeout,
                                   headers={SESSION_HEADER: uuid.uuid4().hex})

    def execute(self, text: str, explain: bool = False) -> str:
        r = self.client.post("/query", params={"mode": "sync", "explain": str(explain).lower()},
                             content=text.encode("utf-8"))
        if r.status_code != 200:
            try:
                body = r.json()
            except ValueError:
                body = {"message": r.text}
            raise ReplError(_format(body))
        return r.text


def _format(body: dict) -> str:
    msg = f"error: {body.get('message', body)}"
    if body.get("caret"):
        msg += "\n" + body["caret"]
    if body.get("trace_id"):
        msg += f"\n(trace id {body['trace_id']})"
    return msg


def complete(buffer: str) -> bool:
    """Whether ``buffer`` ends with a statement terminator outside strings
    and comments."""
    quote = None
    last = ""
    i, n = 0, len(buffer)
    while i < n:
        ch = buffer[i]
        if quote:
            if ch == "\\":
                i += 2
                continue
            if ch == quote:
                quote = None
        elif ch in "\"'":
            quote = ch
        elif buffer.startswith("/*", i):
            end = buffer.find("*/", i + 2)
            if end < 0:
                return False
            i = end + 2
            continue
        elif buffer.startswith("//", i):
            end = buffer.find("\n", i)
            i = n if end < 0 else end
            continue
        if not ch.isspace():
            last = ch if quote is None else ""
        i += 1
    return quote is None and last == ";"


def repl_loop(backend, stdin, stdout, interactive: bool = False) -> None:
    explain = False
    buf: list[str] = []

    def out(text: str) -> None:
        stdout.write(text)
        stdout.flush()

    while True:
        if interactive:
            out(MORE if buf else PROMPT)
        line = stdin.readline()
        if not line:
            break
        stripped = line.strip()
        if not buf and stripped.startswith("\\"):
            cmd, *args = stripped.split()
            if cmd in ("\\quit", "\\q"):
                break
            if cmd == "\\explain":
                if args and args[0] in ("on", "off"):
                    explain = args[0] == "on"
                    out(f"explain {'on' if explain else 'off'}\n")
                else:
                    out("usage: \\explain on|off\n")
                continue
            query = {"\\dv": LIST_DATAVERSES, "\\ds": LIST_DATASETS, "\\df": LIST_FUNCTIONS}.get(cmd)
            if query is None:
                out(f"unknown command {cmd}; try \\dv \\ds \\df \\explain on|off \\quit\n")
                continue
            _run(backend, query, False, out)
            continue
        if not stripped and not buf:
            continue
        buf.append(line)
        text = "".join(buf)
        if complete(text):
            buf = []
            _run(backend, text, explain, out)
    if buf and "".join(buf).strip():
        _run(backend, "".join(buf), explain, out)


def _run(backend, text: str, explain: bool, out) -> None:
    try:
        out(backend.execute(text, explain))
    except ReplError as e:
        out(f"{e}\n")
