import json

import pytest

from deidkit.config import EngineConfig, load_config
from deidkit.errors import ConfigError


class TestLoadConfig:
    def test_defaults(self):
        config = load_config(None, {})
        assert config.mode == "mask" and config.backend_transport == "none"

    def test_nested_backend_keys_flatten(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"backend": {"transport": "mock", "retries": 5}}))
        config = load_config(str(path))
        assert config.backend_transport == "mock"
        assert config.backend_retries == 5

    def test_flags_win_over_file(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"mode": "mask"}))
        config = load_config(str(path), {"mode": "obfuscate", "seed": 3})
        assert config.mode == "obfuscate" and config.seed == 3

    def test_env_var_default_path(self, tmp_path, monkeypatch):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"language": "de", "label_set": "de"}))
        monkeypatch.setenv("DEID_CONFIG", str(path))
        config = load_config(None)
        assert config.language == "de"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"tornado": True}))
        with pytest.raises(ConfigError):
            load_config(str(path))

    def test_obfuscate_requires_seed(self):
        with pytest.raises(ConfigError):
            load_config(None, {"mode": "obfuscate"})

    def test_missing_rule_file_rejected(self):
        with pytest.raises(ConfigError):
            load_config(None, {"rule_files": ("/nope/missing.json",)})

    def test_http_requires_endpoint(self):
        with pytest.raises(ConfigError):
            load_config(None, {"backend_transport": "http"})


class TestMaterialization:
    def test_default_english_rules_loaded(self):
        config = EngineConfig()
        labels = config.load_labels()
        rules = config.load_rules(labels)
        assert len(rules) == 12

    def test_non_english_has_no_default_rules(self):
        config = EngineConfig(language="de", label_set="de")
        labels = config.load_labels()
        assert config.load_rules(labels) == ()

    def test_mock_backend_built(self):
        config = EngineConfig(backend_transport="mock")
        labels = config.load_labels()
        client = config.build_backend(labels)
        assert client is not None
        assert client.healthcheck().model_id == "mock-v1"
