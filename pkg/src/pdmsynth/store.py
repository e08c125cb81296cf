"""Content-addressed artifact directory with an append-only index."""

from __future__ import annotations

import hashlib
import json
import shutil
from pathlib import Path

DONE = ".complete"


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def stage_key(stage: str, config, inputs: dict[str, str]) -> str:
    return hashlib.sha256(canonical({"stage": stage, "config": config, "inputs": inputs}).encode()).hexdigest()


def dir_digest(path: Path) -> str:
    """Hash of every file's relative name and bytes, in sorted order."""
    h = hashlib.sha256()
    for f in sorted(p for p in path.rglob("*") if p.is_file() and p.name != DONE):
        h.update(f.relative_to(path).as_posix().encode())
        h.update(b"\0")
        h.update(f.read_bytes())
    return h.hexdigest()


class ArtifactStore:
    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.index = self.root / "index.jsonl"

    def path(self, stage: str, key: str) -> Path:
        return self.root / f"{stage}-{key[:16]}"

    def lookup(self, stage: str, key: str) -> Path | None:
        p = self.path(stage, key)
        return p if (p / DONE).exists() else None

    def begin(self, stage: str, key: str) -> Path:
        p = self.path(stage, key)
        if p.exists():
            shutil.rmtree(p)
        p.mkdir(parents=True)
        return p

    def commit(self, stage: str, key: str, label: str = "") -> str:
        p = self.path(stage, key)
        digest = dir_digest(p)
        (p / DONE).write_text(digest)
        with open(self.index, "a") as fh:
            fh.write(canonical({"stage": stage, "label": label, "key": key, "digest": digest}) + "\n")
        return digest

    def digest(self, path: Path) -> str:
        return (path / DONE).read_text()

    def entries(self) -> list[dict]:
        if not self.index.exists():
            return []
        return [json.loads(line) for line in self.index.read_text().splitlines() if line.strip()]
