from __future__ import annotations

import json
import subprocess
from pathlib import Path

import pytest

from auditminer.extractor import Finding, ProjectInfo, StructuredReport
from auditminer.taxonomy import load_taxonomy

DATA_DIR = Path(__file__).parent / "data"

FIXTURE_REPO_URL = "https://github.com/example/fixture-repo"

PILLARS = (
    "CWE-284", "CWE-435", "CWE-664", "CWE-682", "CWE-691",
    "CWE-693", "CWE-697", "CWE-703", "CWE-707", "CWE-710",
)


@pytest.fixture(scope="session")
def small_view() -> dict:
    return json.loads((DATA_DIR / "taxonomy_small.json").read_text(encoding="utf-8"))


@pytest.fixture(scope="session")
def small_tree(small_view):
    return load_taxonomy(small_view)


def build_full_view() -> tuple[dict, list[str]]:
    """Deterministic CWE-1000-scale fixture: 10 pillars, 791 nodes, 108
    hardware entries (107 synthetic variants plus CWE-1192)."""
    nodes = []
    hardware: list[str] = []
    next_id = 1300

    def take_id() -> str:
        nonlocal next_id
        nid = f"CWE-{next_id}"
        next_id += 1
        return nid

    for p, pillar in enumerate(PILLARS):
        children = []
        nodes.append({
            "id": pillar,
            "name": f"Pillar concept {p}",
            "description": f"Root weakness category {p}.",
            "abstraction": "Pillar",
            "parents": [],
            "children": children,
            "hardware": False,
        })
        for c in range(6):
            class_id = take_id()
            children.append(class_id)
            class_children = []
            nodes.append({
                "id": class_id,
                "name": f"Class weakness {class_id}",
                "description": "Synthetic class-level weakness.",
                "abstraction": "Class",
                "parents": [pillar],
                "children": class_children,
                "hardware": False,
            })
            for b in range(4):
                base_id = take_id()
                class_children.append(base_id)
                base_children = []
                nodes.append({
                    "id": base_id,
                    "name": f"Base weakness {base_id}",
                    "description": "Synthetic base-level weakness.",
                    "abstraction": "Base",
                    "parents": [class_id],
                    "children": base_children,
                    "hardware": False,
                })
                for v in range(2):
                    variant_id = take_id()
                    base_children.append(variant_id)
                    is_hardware = len(hardware) < 107
                    if is_hardware:
                        hardware.append(variant_id)
                    nodes.append({
                        "id": variant_id,
                        "name": f"Variant weakness {variant_id}",
                        "description": "Synthetic variant-level weakness.",
                        "abstraction": "Variant",
                        "parents": [base_id],
                        "children": [],
                        "hardware": is_hardware,
                    })

    # One real hardware entry rounds the list out to 108.
    nodes[1]["children"].append("CWE-1192")
    nodes.append({
        "id": "CWE-1192",
        "name": "Improper Identifier for IP Block used in System-On-Chip",
        "description": "A system-on-chip hardware block is identified improperly.",
        "abstraction": "Base",
        "parents": [nodes[1]["id"]],
        "children": [],
        "hardware": True,
    })
    hardware.append("CWE-1192")
    return {"view": "CWE-1000", "nodes": nodes}, hardware


@pytest.fixture(scope="session")
def full_view() -> tuple[dict, list[str]]:
    return build_full_view()


def make_finding(fid: int = 1, title: str = "Reentrancy in withdraw",
                 severity: str = "high", description: str = "",
                 location: str = "") -> Finding:
    return Finding(id=fid, title=title, description=description,
                   severity=severity, location=location)


def make_report(url: str = "", commit_id: str = "", address: str = "",
                chain: str = "", findings: list[Finding] | None = None) -> StructuredReport:
    return StructuredReport(
        project_info=ProjectInfo(url=url, commit_id=commit_id,
                                 address=address, chain=chain),
        findings=list(findings or []),
    )


def _git(repo: Path, *args: str) -> None:
    env = {
        "GIT_AUTHOR_NAME": "Fixture",
        "GIT_AUTHOR_EMAIL": "fixture@example.com",
        "GIT_AUTHOR_DATE": "2024-01-01T00:00:00Z",
        "GIT_COMMITTER_NAME": "Fixture",
        "GIT_COMMITTER_EMAIL": "fixture@example.com",
        "GIT_COMMITTER_DATE": "2024-01-01T00:00:00Z",
        "HOME": str(repo),
        "PATH": "/usr/bin:/bin:/usr/local/bin",
    }
    subprocess.run(["git", *args], cwd=repo, env=env, check=True, capture_output=True)


def create_fixture_repo(root: Path) -> Path:
    """A tiny contract repo with an 'audit-v1' tag for deterministic fetches."""
    repo = root / "fixture-repo"
    (repo / "contracts").mkdir(parents=True)
    (repo / "contracts" / "Vault.sol").write_text(
        "pragma solidity ^0.8.17;\n\ncontract Vault {\n"
        "    mapping(address => uint256) public balances;\n"
        "    function withdraw(uint256 amount) external {\n"
        "        (bool ok, ) = msg.sender.call{value: amount}(\"\");\n"
        "        require(ok);\n"
        "        balances[msg.sender] -= amount;\n"
        "    }\n}\n",
        encoding="utf-8",
    )
    (repo / "contracts" / "Token.sol").write_text(
        "pragma solidity ^0.8.17;\n\ncontract Token {\n"
        "    string public name = \"Acme\";\n}\n",
        encoding="utf-8",
    )
    (repo / "README.md").write_text("Fixture project.\n", encoding="utf-8")
    _git(repo, "init", "--quiet")
    _git(repo, "add", ".")
    _git(repo, "commit", "--quiet", "-m", "initial")
    _git(repo, "tag", "audit-v1")
    return repo


@pytest.fixture
def fixture_repo(tmp_path) -> Path:
    return create_fixture_repo(tmp_path)
