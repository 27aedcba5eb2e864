import json
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from dcres import cli, scenario


def read_telemetry(path):
    """Load a telemetry CSV into a dict of named column arrays."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1)
    return {name: data[:, k] for k, name in enumerate(header)}


def read_reports(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def study_outputs(tmp_path_factory):
    """One full run of the bundled two-event study, shared across tests."""
    out = tmp_path_factory.mktemp("study")
    outputs = cli.cmd_simulate(scenario.fixture_path("two_event_study.toml"),
                               str(out))
    return outputs


@pytest.fixture(scope="session")
def study_telemetry(study_outputs):
    return read_telemetry(study_outputs.telemetry_path)


@pytest.fixture(scope="session")
def study_reports(study_outputs):
    return read_reports(study_outputs.reports_path)["reports"]
