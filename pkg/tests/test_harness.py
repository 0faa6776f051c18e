import datetime as dt

import pytest

from stablesim.harness import (
    SCENARIOS,
    ConfigError,
    ExternalSeriesError,
    ScenarioConfig,
    derive_seed,
    format_config,
    format_table,
    load_external_series,
    parse_config,
    run_scenario,
    scale_series,
    summarize,
)


def test_empty_config_gives_defaults():
    cfg = parse_config("", seed=5)
    assert cfg.seed == 5
    assert cfg.market.alpha == 0.0001
    assert cfg.market.n_speculators == 500
    assert cfg.alphas == (0.00001, 0.0001, 0.001)


def test_config_values_and_comments():
    cfg = parse_config("""
        # comment
        seed = 9
        alpha = 0.001   # trailing comment
        alphas = 0.1, 0.2
        behavioral = false
        days = 30
    """)
    assert cfg.seed == 9 and cfg.market.alpha == 0.001
    assert cfg.alphas == (0.1, 0.2)
    assert cfg.market.behavioral is False and cfg.market.days == 30


def test_cli_seed_overrides_file():
    assert parse_config("seed = 1", seed=2).seed == 2


@pytest.mark.parametrize("text, fragment", [
    ("seed = 1\nbogus = 3", "line 2: unknown key 'bogus'"),
    ("seed = 1\ndays = ten", "line 2: days expects an integer"),
    ("seed = 1\nalpha = nan", "finite"),
    ("seed = 1\nbehavioral = maybe", "boolean"),
    ("seed = 1\nn_speculators = -4", "n_speculators"),
    ("seed = 1\nseed = 2", "duplicate"),
    ("seed = 1\njust words", "line 2: expected"),
    ("alpha = 0.1", "missing seed"),
    ("seed = 1\ncurrency = bitcoin", "unknown key"),
])
def test_config_errors(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        parse_config(text)


def test_unknown_scenario():
    with pytest.raises(ConfigError):
        ScenarioConfig("nope", 0)


def test_format_config_round_trips():
    cfg = parse_config("seed = 4\nalpha = 0.003\nmultipliers = 1.0, 3.0\nfx_path = x.csv", scenario="intervals")
    again = parse_config(format_config(cfg), scenario="intervals")
    assert again == cfg


def test_derive_seed_is_stable_and_distinct():
    assert derive_seed(1, 0) == derive_seed(1, 0)
    seeds = {derive_seed(m, s, i) for m in range(4) for s in range(3) for i in range(3)}
    assert len(seeds) == 36
    with pytest.raises(ValueError):
        derive_seed(-1, 0)


def test_summarize():
    s = summarize([3.0, 1.0, 2.0])
    assert (s.min, s.max, s.mean, s.final) == (1.0, 3.0, 2.0, 2.0)
    with pytest.raises(ValueError):
        summarize([])


def test_format_table_aligns():
    text = format_table(["run", "min"], [["a", 1.0], ["longer", 123.456]])
    lines = text.splitlines()
    assert len({len(line) for line in lines}) == 1
    assert lines[3].endswith("123.46")


def test_external_series(tmp_path):
    p = tmp_path / "fx.csv"
    p.write_text("date,value\n2014-02-01,728.39\n2014-01-01,576.46\n")
    rows = load_external_series(p)
    assert rows == [(dt.date(2014, 1, 1), 576.46), (dt.date(2014, 2, 1), 728.39)]
    scaled = scale_series([v for _, v in rows], 0.153)
    assert [round(x, 2) for x in scaled] == [88.20, 111.44]


@pytest.mark.parametrize("body, line", [
    ("date,value\n2014-01-01,1\n2014-13-01,2\n", 3),
    ("2014-01-01,abc\n", 1),
    ("2014-01-01,1,2\n", 1),
])
def test_external_series_errors(tmp_path, body, line):
    p = tmp_path / "fx.csv"
    p.write_text(body)
    with pytest.raises(ExternalSeriesError, match=f":{line}:"):
        load_external_series(p)


def test_intervals_scenario_files(tmp_path):
    cfg = ScenarioConfig("intervals", 3, interval_samples=500)
    res = run_scenario(cfg, tmp_path)
    names = {p.name for p in tmp_path.iterdir()}
    assert {"series.csv", "summary.txt", "params.txt", "blocks_x1.csv", "blocks_x2.csv"} <= names
    assert set(res.data["means"]) == {1.0, 2.0, 0.8}


def test_market_scenario_files(tmp_path):
    cfg = parse_config("days = 20", scenario="sweep-alpha-stc", seed=1)
    run_scenario(cfg, tmp_path)
    lines = (tmp_path / "series.csv").read_text().splitlines()
    assert lines[0].startswith("alpha,day,price,demand,supply")
    assert len(lines) == 1 + 3 * 20
    assert "alpha=0.001" in (tmp_path / "summary.txt").read_text()


def test_compare_fx_requires_path(tmp_path):
    with pytest.raises(ConfigError):
        run_scenario(parse_config("days = 5", scenario="compare-fx", seed=0), tmp_path)


def test_compare_fx(tmp_path):
    fx = tmp_path / "fx.csv"
    fx.write_text("2014-01-01,576.46\n2014-01-02,728.39\n")
    cfg = parse_config(f"days = 5\nfx_path = {fx}", scenario="compare-fx", seed=0)
    res = run_scenario(cfg, tmp_path / "out")
    assert len(res.data["scaled"]) == 5
    rows = (tmp_path / "out" / "series.csv").read_text().splitlines()
    assert rows[1].endswith("2014-01-01,576.46")
    assert rows[3].endswith(",,")


def test_every_scenario_registered():
    assert set(SCENARIOS) == {"intervals", "supply", "market-btc", "market-stc", "sweep-alpha-btc",
                              "sweep-alpha-stc", "sweep-reward-stc", "compare-fx"}
