"""Demonstration fixtures and the frozen score thresholds.

The scripted players regenerate the archives bit-for-bit from the seeds
recorded in data/thresholds.json; that file also pins each game's
steps-to-threshold score (a fraction of the scripted players' mean,
computed once and committed).
"""

from __future__ import annotations

import json
import os
from importlib import resources
from pathlib import Path

from .demos import load_demo_archive

_SPEC = None


def spec() -> dict:
    global _SPEC
    if _SPEC is None:
        with resources.files("deskrl.data").joinpath("thresholds.json").open() as f:
            _SPEC = json.load(f)
    return _SPEC


def threshold(env_id: str) -> float:
    return float(spec()[env_id]["threshold"])


def fixtures_root() -> Path:
    return Path(os.environ.get("DESKRL_FIXTURES", "fixtures"))


def fixture_path(env_id: str, root=None) -> Path:
    return Path(root or fixtures_root()) / f"{env_id}.demo"


def ensure_fixture(env_id: str, root=None) -> Path:
    """Generate the archive if missing; validate its counts either way."""
    from .scripted import generate_fixture_archive

    info = spec()[env_id]
    path = fixture_path(env_id, root)
    if not path.exists():
        generate_fixture_archive(path, env_id, info["episodes"], info["base_seed"])
    archive = load_demo_archive(path)
    if len(archive.episodes) != info["episodes"] or archive.total_steps != info["states"]:
        raise RuntimeError(
            f"fixture {path} does not match the committed counts "
            f"({len(archive.episodes)} eps / {archive.total_steps} states vs "
            f"{info['episodes']} / {info['states']}); regenerate with `deskrl fixtures`")
    return path
