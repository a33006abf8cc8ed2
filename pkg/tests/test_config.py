import pytest

from rfcnn.config import DEFAULT_PRESET, KEYS, dump_config, load_config, parse_lines, resolve
from rfcnn.errors import ConfigError


def test_paper_preset_defaults():
    cfg = resolve({"preset": "paper"})
    assert cfg.detector_train.lr == 0.0003 and cfg.detector_train.momentum == 0.9
    assert cfg.classifier_train.iterations == 5000 and cfg.classifier_train.batch == 32
    assert cfg.classifier.input_side == 224 and cfg.classifier.dropout == 0.5
    assert cfg.detector.ohem_batch == 16 and cfg.detector.k == 3
    assert (cfg.n_train, cfg.n_test) == (3409, 2276)


def test_desk_preset_is_default():
    cfg = resolve({})
    assert cfg.preset == DEFAULT_PRESET == "desk"
    assert (cfg.n_train, cfg.n_test) == (341, 228)


def test_overrides_and_comments():
    pairs = parse_lines("# comment\nseed = 7  # trailing\n\nclf_conv_channels=8,8,8,8,8\ndet_vote=sum\n")
    cfg = resolve(pairs)
    assert cfg.seed == 7 and cfg.classifier.conv_channels == (8, 8, 8, 8, 8) and cfg.detector.vote == "sum"
    assert cfg.classifier_train_for().seed == 7
    assert resolve(pairs, seed=3).seed == 3


def test_dropout_key_feeds_both_sections():
    cfg = resolve({"clf_dropout": "0.25"})
    assert cfg.classifier.dropout == 0.25 and cfg.classifier_train.dropout == 0.25


@pytest.mark.parametrize("text", ["bogus=1", "seed", "seed=1\nseed=2", "seed=abc", "preset=huge",
                                  "det_vote=max", "clf_input_side=20", "curve_sizes=5,5"])
def test_bad_config_rejected(text):
    with pytest.raises(ConfigError):
        resolve(parse_lines(text))


def test_dump_lists_every_key_and_reloads(tmp_path):
    cfg = resolve({"seed": "5", "det_iterations": "7"})
    text = dump_config(cfg)
    assert len(text.splitlines()) == len(KEYS)
    path = tmp_path / "c.txt"
    path.write_text(text, encoding="utf-8")
    assert load_config(path) == cfg


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.txt")
