import json
from pathlib import Path

import pytest

from graphaudit.cli import ingest, load_config
from graphaudit.resources import load_profile

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
APPS = FIXTURES / "apps"
RTA_DIR = FIXTURES / "rta"
SCRIPTS = FIXTURES / "scripts"

LABEL_TO_ANALYZER = {
    "confidentiality": "confidentiality",
    "integrity": "integrity",
    "availability": "availability",
    "broadcastBlockers": "broadcast-blockers",
    "reflection": "reflection",
    "native": "native-code",
}


def app_names() -> list[str]:
    return sorted(p.name for p in APPS.iterdir() if p.is_dir())


def app_labels(name: str) -> dict:
    return json.loads((APPS / name / "labels.json").read_text())


@pytest.fixture(scope="session")
def platform_profile():
    return load_profile((FIXTURES / "platform" / "profile.json").read_text())


@pytest.fixture(scope="session")
def corpus():
    """Every fixture app parsed, indexed and frozen, keyed by app name."""
    out = {}
    for name in app_names():
        out[name] = ingest(load_config(str(APPS / name / "audit.json")))
    return out


@pytest.fixture()
def smsblocker(corpus):
    return corpus["smsblocker"]
