# tests/test_config.py
import json

import pytest

from core import config


@pytest.fixture
def override_config(tmp_path, monkeypatch):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({
        "classes": {"names": ["background", "building", "road"], "background": 0},
        "siou": {"tau": 0.4, "connectivity": 4, "classes_of_interest": [1, 2]},
        "workers": {"threads": 2},
    }), encoding="utf-8")
    monkeypatch.setenv("TEMPWEAK_CONFIG", str(path))
    monkeypatch.delenv("TEMPWEAK_THREADS", raising=False)
    config.reload_config()
    yield path
    monkeypatch.delenv("TEMPWEAK_CONFIG", raising=False)
    config.reload_config()


def test_override_file_replaces_defaults(override_config):
    assert config.get_tau() == pytest.approx(0.4)
    assert config.get_connectivity() == 4
    assert config.get_classes_of_interest() == [1, 2]
    # sections missing from the file fall back to the in-code defaults
    assert config.get_refinement_threshold() == pytest.approx(0.02)


def test_thread_count_precedence(override_config, monkeypatch):
    assert config.get_thread_count() == 2
    monkeypatch.setenv("TEMPWEAK_THREADS", "3")
    assert config.get_thread_count() == 3
    assert config.get_thread_count(5) == 5
    assert config.get_thread_count(0) == 1


def test_non_integer_thread_env_falls_back_to_file(override_config, monkeypatch):
    monkeypatch.setenv("TEMPWEAK_THREADS", "many")
    assert config.get_thread_count() == 2


def test_resolve_class_accepts_names_and_indices(override_config):
    assert config.resolve_class("road") == 2
    assert config.resolve_class(" building ") == 1
    assert config.resolve_class("7") == 7
    with pytest.raises(KeyError):
        config.resolve_class("tree")


def test_missing_override_file_leaves_defaults(tmp_path, monkeypatch):
    monkeypatch.setenv("TEMPWEAK_CONFIG", str(tmp_path / "absent.json"))
    config.reload_config()
    try:
        assert config.get_tau() == pytest.approx(0.25)
        assert config.get_class_names() == ["background", "building"]
    finally:
        monkeypatch.delenv("TEMPWEAK_CONFIG")
        config.reload_config()
