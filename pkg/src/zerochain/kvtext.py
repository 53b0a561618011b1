"""Canonical flat ``key = value`` text documents with typed scalars.

One pair per line, keys in insertion order.  Values are ``int``, ``float``
(written with ``repr`` so they round-trip exactly), ``bool``, ``None`` or a
bare string.  Lists of scalars are comma separated inside brackets.
Blank lines and ``#`` comments are ignored on input.
"""
import re

_INT = re.compile(r"^[+-]?\d+$")
_FLOAT = re.compile(r"^[+-]?(\d+\.?\d*([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?|inf|nan)$")
_KEY = re.compile(r"^[A-Za-z_][A-Za-z0-9_.]*$")


def _fmt(v):
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in v) + "]"
    s = str(v)
    if not s or s != s.strip() or any(c in s for c in "\n#[],") or _parse_scalar(s) != s:
        raise ValueError(f"string value {s!r} cannot be written unambiguously")
    return s


def _parse_scalar(s):
    if s == "none":
        return None
    if s in ("true", "false"):
        return s == "true"
    if _INT.match(s):
        return int(s)
    if _FLOAT.match(s):
        return float(s)
    return s


def dumps(mapping):
    lines = []
    for k, v in mapping.items():
        if not _KEY.match(k):
            raise ValueError(f"bad key {k!r}")
        lines.append(f"{k} = {_fmt(v)}")
    return "\n".join(lines) + "\n"


def loads(text):
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {n}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        if not _KEY.match(k):
            raise ValueError(f"line {n}: bad key {k!r}")
        if k in out:
            raise ValueError(f"line {n}: duplicate key {k!r}")
        if v.startswith("[") and v.endswith("]"):
            body = v[1:-1].strip()
            out[k] = [_parse_scalar(s.strip()) for s in body.split(",")] if body else []
        else:
            out[k] = _parse_scalar(v)
    return out
