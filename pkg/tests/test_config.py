import pytest

from leofuzz.config import CampaignConfig, ConfigError, load_config, parse_config_text, parse_duration


def test_defaults():
    c = CampaignConfig()
    assert (c.beta, c.epsilon, c.alpha, c.t_k, c.base_energy) == (0.8, 0.5, 0.95, 0.05, 16)
    assert (c.rate_init, c.gamma, c.delta, c.th_min, c.dsc_init) == (0.8, 0.1, 0.5, 100.0, 10)
    assert c.t_x == 30.0


def test_aliases_and_validation():
    assert CampaignConfig(strategy="aflgo").strategy == "aflgo_distance"
    assert CampaignConfig(strategy="seqcov").strategy == "seqcov_single"
    for bad in (dict(strategy="x"), dict(beta=2), dict(alpha=0.5), dict(budget=-1), dict(gamma=0)):
        with pytest.raises(ConfigError):
            CampaignConfig(**bad)


def test_deterministic_budget_and_tx():
    c = CampaignConfig(deterministic=True, exec_budget=20000, budget=1e9)
    assert c.effective_budget == pytest.approx(20.0)
    assert c.t_x == pytest.approx(10.0)
    assert CampaignConfig(tx_seconds=7).t_x == 7


def test_durations():
    assert parse_duration("90") == 90 and parse_duration("90s") == 90
    assert parse_duration("5m") == 300 and parse_duration("1h") == 3600
    with pytest.raises(ConfigError):
        parse_duration("soon")


def test_config_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("# campaign\nstrategy = aflgo\nbudget = 2m\nexec-budget = 1e5\nconcolic = off\ntx_seconds = none\n")
    c = load_config(p, beta=0.7, alpha=None)
    assert c.strategy == "aflgo_distance" and c.budget == 120 and c.exec_budget == 100000
    assert c.concolic is False and c.beta == 0.7 and c.alpha == 0.95


def test_config_file_errors():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("nonsense")
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config_text("colour = red")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("beta=0.5\nbase_energy = lots")
