"""Flat ``key = value`` text files (configs, sidecars, manifests).

Blank lines and ``#`` comments are ignored; a trailing ``# ...`` on a value
line is treated as a comment too, which is where units are documented.
"""

from pathlib import Path

from ..errors import ContainerError, ValidationError


def parse(text, source="<string>"):
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ValidationError(f"{source}:{lineno}: empty key")
        if key in out:
            raise ValidationError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def read(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ContainerError(f"cannot read: {exc.strerror}", path) from exc
    return parse(text, str(path))


def format_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, tuple)):
        return ",".join(format_value(x) for x in v)
    return str(v)


def dump(mapping, header=None):
    lines = [f"# {h}" for h in (header or [])]
    lines += [f"{k} = {format_value(v)}" for k, v in mapping.items()]
    return "\n".join(lines) + "\n"


def write(path, mapping, header=None):
    path = Path(path)
    try:
        path.write_text(dump(mapping, header))
    except OSError as exc:
        raise ContainerError(f"cannot write: {exc.strerror}", path) from exc
    return path
