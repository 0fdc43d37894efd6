"""YAML run-configuration parsing and validation."""

import pytest

from perturbench.config import load_config, parse_config
from perturbench.errors import ConfigurationError


def test_empty_document_gives_desk_defaults():
    cfg = parse_config({})
    assert cfg.seed == 0
    assert cfg.synth.num_classes == 10
    assert cfg.synth.image_size == 32
    assert cfg.model.family == "plain"
    assert cfg.train.epochs == 30
    assert cfg.train_fraction == 0.8
    assert len(cfg.attacks) == 6  # fgsm+bim at each default epsilon
    assert cfg.analysis.perplexity == 15.0


def test_default_attack_sweep_epsilons():
    cfg = parse_config({})
    fgsm = [a for a in cfg.attacks if a.algorithm == "fgsm"]
    bim = [a for a in cfg.attacks if a.algorithm == "bim"]
    assert [round(a.epsilon * 255) for a in fgsm] == [2, 4, 8]
    assert [round(a.epsilon * 255) for a in bim] == [2, 4, 8]
    for a in bim:
        assert a.resolved_step() == a.epsilon / 4
        assert a.iterations == 10


def test_seed_inheritance_and_override():
    doc = {"seed": 5, "synth": {"classes": 4}, "train": {"seed": 9}}
    cfg = parse_config(doc)
    assert cfg.synth.seed == 5  # inherits the top seed
    assert cfg.train.seed == 9  # explicit wins
    cfg2 = parse_config(doc, seed_override=77)
    assert cfg2.seed == 77
    assert cfg2.synth.seed == 77
    assert cfg2.train.seed == 9


def test_unknown_field_names_path():
    with pytest.raises(ConfigurationError, match="synth.colour"):
        parse_config({"synth": {"colour": 3}})
    with pytest.raises(ConfigurationError, match="config.extra"):
        parse_config({"extra": 1})


def test_field_paths_in_type_errors():
    with pytest.raises(ConfigurationError, match="train.batch_size"):
        parse_config({"train": {"batch_size": "many"}})
    with pytest.raises(ConfigurationError, match="model.family"):
        parse_config({"model": {"family": "resnet50"}})
    with pytest.raises(ConfigurationError, match=r"attacks\[0\]"):
        parse_config({"attacks": [{"algorithm": "fgsm", "epsilon": 2.0}]})
    with pytest.raises(ConfigurationError, match="synth.classes"):
        parse_config({"synth": {"classes": 1}})


def test_attack_entries_parse(tmp_path):
    path = tmp_path / "cfg.yaml"
    path.write_text(
        """
seed: 3
attacks:
  - algorithm: bim
    epsilon: 0.05
    step_size: 0.0125
    iterations: 4
    dump_images: 2
  - algorithm: fgsm
    epsilon: 0.1
    confidence_threshold: 0.5
"""
    )
    cfg = load_config(path)
    assert cfg.attacks[0].algorithm == "bim"
    assert cfg.attacks[0].iterations == 4
    assert cfg.dump_images == (2, 0)
    assert cfg.attacks[1].confidence_threshold == 0.5


def test_invalid_yaml_and_missing_file(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("a: [unclosed")
    with pytest.raises(ConfigurationError, match="YAML"):
        load_config(bad)
    with pytest.raises(ConfigurationError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
