import time

import pytest

from blenderlab.pipeline import PipelineConfig, build_arc_system, certify


@pytest.fixture(scope="session")
def flagship_config():
    return PipelineConfig()


@pytest.fixture(scope="session")
def flagship_build(flagship_config):
    return build_arc_system(flagship_config)


@pytest.fixture(scope="session")
def flagship_certificate(flagship_config, flagship_build):
    t0 = time.time()
    cert = certify(flagship_config, _reuse_build=flagship_build)
    cert.provenance["wall_runtime"] = time.time() - t0
    return cert
