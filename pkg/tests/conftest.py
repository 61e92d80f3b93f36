from __future__ import annotations

import json

import pytest

from spanlab.campaigns import CampaignConfig
from spanlab.engine import CampaignManager
from spanlab.mock_server import MockModelServer
from spanlab.sample import write_sample_bundle


@pytest.fixture
def data_root(tmp_path):
    write_sample_bundle(tmp_path)
    return tmp_path


@pytest.fixture
def manager(data_root):
    return CampaignManager(data_root)


@pytest.fixture
def human_engine(manager, data_root):
    config = CampaignConfig.from_json(json.loads((data_root / "campaign_human.json").read_text("utf-8")))
    return manager.create(config)


@pytest.fixture
def mock_model():
    """Factory starting mock model servers on ephemeral ports; all stopped on teardown."""
    servers: list[MockModelServer] = []

    def start(scenario: str = "valid") -> MockModelServer:
        server = MockModelServer(scenario=scenario).start()
        servers.append(server)
        return server

    yield start
    for server in servers:
        server.stop()
