"""Flat ``key = value`` configuration files.

``#`` starts a comment, blank lines are ignored, and lists are written as
repeated dotted keys (``ue.1.qci``, ``ue.2.qci``) or comma-separated values.
"""

from __future__ import annotations

from pathlib import Path

from ricsim.errors import ConfigError, MissingKey


class FlatConfig:
    def __init__(self, items: dict[str, str], source: str = "<string>"):
        self._items = items
        self.source = source
        self._used: set[str] = set()

    @classmethod
    def parse(cls, text: str, source: str = "<string>") -> FlatConfig:
        items: dict[str, str] = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{source}:{lineno}", f"expected 'key = value', got {raw.strip()!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError(f"{source}:{lineno}", "empty key")
            if key in items:
                raise ConfigError(key, f"defined twice ({source}:{lineno})")
            items[key] = value
        return cls(items, source)

    @classmethod
    def load(cls, path) -> FlatConfig:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(str(path), f"cannot read: {exc.strerror}") from None
        return cls.parse(text, str(path))

    def __contains__(self, key):
        return key in self._items

    def keys(self):
        return list(self._items)

    def get(self, key: str, default=None):
        self._used.add(key)
        return self._items.get(key, default)

    def require(self, key: str) -> str:
        if key not in self._items:
            raise MissingKey(key)
        return self.get(key)

    def get_int(self, key: str, default=None, minimum=None) -> int:
        raw = self.get(key)
        if raw is None:
            if default is None:
                raise MissingKey(key)
            return default
        try:
            value = int(raw.replace("_", ""))
        except ValueError:
            raise ConfigError(key, f"expected an integer, got {raw!r}") from None
        if minimum is not None and value < minimum:
            raise ConfigError(key, f"must be >= {minimum}, got {value}")
        return value

    def get_float(self, key: str, default=None) -> float:
        raw = self.get(key)
        if raw is None:
            if default is None:
                raise MissingKey(key)
            return default
        try:
            return float(raw)
        except ValueError:
            raise ConfigError(key, f"expected a number, got {raw!r}") from None

    def get_list(self, key: str, default=()) -> list[str]:
        raw = self.get(key)
        if raw is None:
            return list(default)
        return [part.strip() for part in raw.split(",") if part.strip()]

    def subkeys(self, prefix: str) -> list[str]:
        """Distinct next path components under ``prefix.``, in file order."""
        out = []
        for key in self._items:
            if key.startswith(prefix + "."):
                head = key[len(prefix) + 1:].split(".", 1)[0]
                if head not in out:
                    out.append(head)
        return out

    def unused(self) -> list[str]:
        return [k for k in self._items if k not in self._used]
