from __future__ import annotations

import json
import time

import pytest

from jitsteer.gateway import ProviderGateway, Role, RoleConfig
from jitsteer.scripted import ScriptedProvider

SCENARIO_INDUCTION = json.dumps({
    "reasoning": "Drafting a systems paper section; clarity dominates.",
    "goals": [
        {"name": "Enhance technical clarity",
         "description": "Make the architecture description easier to follow.",
         "weight": 9},
        {"name": "Strengthen evaluation presentation",
         "description": "Present the studies and their results more crisply.",
         "weight": 8},
    ],
})


def scripted_gateway(role_providers: dict) -> ProviderGateway:
    configs = {}
    providers = {}
    for role, provider in role_providers.items():
        configs[role] = RoleConfig(provider="scripted",
                                   strictness=provider.transcript.strictness)
        providers[role] = provider
    return ProviderGateway(configs, providers)


def wait_for_job(engine, job_id: str, timeout: float = 10.0):
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = engine.get_job(job_id)
        if job.state in ("done", "failed"):
            return job
        time.sleep(0.01)
    raise TimeoutError(f"job {job_id} did not finish; last state {job.state}")


@pytest.fixture
def matched_provider():
    def make(pairs):
        return ScriptedProvider.from_pairs(pairs, strictness="matched")
    return make


def pytest_runtest_logreport(report):
    # One visible pass/fail line per acceptance criterion.
    if report.when != "call":
        return
    module, _, test = report.nodeid.partition("::")
    if module.endswith("test_acceptance.py"):
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\n[acceptance] {test}: {outcome}", flush=True)
