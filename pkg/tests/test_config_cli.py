import json
import math

import pytest

from backscatter_game import cli
from backscatter_game.channel import PhyConfig, dbm_to_watts, thermal_noise, wavelength
from backscatter_game.config import (
    CONFIG_ENV_VAR,
    DEFAULT_TOML,
    default_config,
    load,
    loads,
    parse_quantity,
    POWER_DB,
    POWER_UNITS,
)
from backscatter_game.errors import ConfigError
from backscatter_game.learning import HotbootCache

TINY_RUN = """
[run]
slots = 150
seeds = [0, 1]
window = 50

[learner]
hotboot_realizations = 2
hotboot_slots = 60
"""


def test_defaults_match_reference_setup():
    cfg = default_config()
    phy = cfg.setting.phy
    assert phy.p_hap == pytest.approx(dbm_to_watts(43))
    assert phy.delta == 0.5
    assert phy.g_t == pytest.approx(10 ** 0.6) and phy.g_r == pytest.approx(10 ** 0.6)
    assert phy.g_j == pytest.approx(10 ** 0.18)
    assert phy.lambda_hap == pytest.approx(wavelength(2.4e9))
    assert (phy.d_hap, phy.d_j) == (15.0, 20.0)
    assert (phy.gamma0, phy.gamma1) == (1.0, -1.0)
    assert phy.n0 == pytest.approx(thermal_noise(1e6))
    game = cfg.setting.game
    assert (game.kappa, game.w, game.c_phi, game.c_j) == (1.0, 1e6, 0.1, 0.1)
    assert game.p_j_max == pytest.approx(1.0)
    assert (game.k, game.m) == (10, 10)
    learner = cfg.setting.learner
    assert (learner.beta, learner.gamma, learner.epsilon) == (0.5, 0.8, 0.05)
    assert cfg.setting.quantizer.n_levels == 8
    assert cfg.user.kind == "q-learning" and cfg.jammer.kind == "best-response-oracle"
    assert (cfg.run.slots, cfg.run.seeds) == (2000, tuple(range(10)))
    assert (cfg.hotboot.realizations, cfg.hotboot.slots) == (20, 500)
    assert [s.kind for s in cfg.sweep_user] == ["q-learning", "hotboot-q", "random", "fixed",
                                                "equilibrium-oracle"]


def test_dataclass_defaults_agree_with_toml_defaults():
    assert default_config().setting.phy == PhyConfig()
    assert loads("").setting.fingerprint() == loads(DEFAULT_TOML).setting.fingerprint()


@pytest.mark.parametrize("text,expected", [
    ("1 W", 1.0), ("30 dBm", 1.0), ("0 dBW", 1.0), ("250 mW", 0.25), ("-10 dBm", 1e-4), ("2e-3 W", 2e-3),
])
def test_parse_power(text, expected):
    assert parse_quantity(text, POWER_UNITS, db_units=POWER_DB) == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("bad", ["1", "1 parsec", "W", 1.0, True, None])
def test_parse_power_rejects(bad):
    with pytest.raises(ValueError):
        parse_quantity(bad, POWER_UNITS, db_units=POWER_DB)


def test_units_are_respected():
    cfg = loads('[phy]\nd_hap = "1.5 km"\nlambda_hap = "12.5 cm"\nfreq_j = "900 MHz"\n')
    assert cfg.setting.phy.d_hap == 1500.0
    assert cfg.setting.phy.lambda_hap == pytest.approx(0.125)
    assert cfg.setting.phy.lambda_j == pytest.approx(wavelength(9e8))


def test_explicit_noise_and_thermal_follow_bandwidth():
    assert loads('[phy]\nn0 = "-100 dBm"\n').setting.phy.n0 == pytest.approx(1e-13)
    assert loads('[game]\nw = "2 MHz"\n').setting.phy.n0 == pytest.approx(thermal_noise(2e6))


def _error(text):
    with pytest.raises(ConfigError) as exc:
        loads(text, "exp.toml")
    return exc.value


@pytest.mark.parametrize("text,key,line", [
    ('[phy]\nd_hap = "-3 m"\n', "d_hap", 2),
    ('[phy]\n\nd_hap = 15\n', "d_hap", 3),
    ('[phy]\nbogus = 1\n', "bogus", 2),
    ('[game]\nkappa = 2.0\n', "kappa", 2),
    ('[game]\nk = 2.5\n', "k", 2),
    ('[learner]\nbeta = 0\n', "beta", 2),
    ('[learner]\nrng = "mystery"\n', "rng", 2),
    ('[phy]\nfreq_hap = "1 GHz"\nlambda_hap = "1 m"\n', "lambda_hap", 3),
    ('[phy]\nfreq_hap = "2.4 GHz"\ndelta = 1.2\n', "delta", 3),
    ('[user]\nkind = "genius"\n', "kind", 2),
    ('[user]\nkind = "fixed"\nvalue = 1.5\n', "value", 3),
    ('[jammer]\nkind = "hotboot-q"\n', "kind", 2),
    ('[jammer]\nkind = "fixed"\nvalue = "2 W"\n', "value", 3),
    ('[jammer]\nkind = "fixed"\nvalue = "lots"\n', "value", 3),
    ('[run]\nseeds = []\n', "seeds", 2),
    ('[run]\nthreshold = 0\n', "threshold", 2),
])
def test_config_errors_name_key_and_line(text, key, line):
    err = _error(text)
    assert err.key.endswith(key)
    assert err.line == line
    assert f"line {line}" in str(err) and key in str(err)


def test_unknown_section_and_bad_toml():
    assert "nonsense" in str(_error("[nonsense]\nx = 1\n"))
    with pytest.raises(ConfigError):
        loads("[phy\n")


def test_load_from_env_and_missing_file(tmp_path, monkeypatch):
    path = tmp_path / "c.toml"
    path.write_text('[game]\nc_phi = 0.25\n')
    monkeypatch.setenv(CONFIG_ENV_VAR, str(path))
    assert load().setting.game.c_phi == 0.25
    monkeypatch.delenv(CONFIG_ENV_VAR)
    assert load().setting.game.c_phi == 0.1
    with pytest.raises(ConfigError):
        load(tmp_path / "missing.toml")


def _cli(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_cli_equilibrium(capsys):
    code, out, _ = _cli(capsys, "equilibrium")
    payload = json.loads(out)
    assert code == 0
    assert payload["certified"] is True
    assert payload["p_j_star_watts"] == 1.0
    assert payload["phi_star"] == pytest.approx(0.7598174386809988, abs=1e-6)


def test_cli_equilibrium_without_jammer_gain(capsys, tmp_path):
    path = tmp_path / "c.toml"
    path.write_text('[phy]\ng_j = 0.0\n')
    code, out, _ = _cli(capsys, "-c", str(path), "equilibrium")
    assert code == 0
    assert json.loads(out)["p_j_star_watts"] == 0.0


def test_cli_config_error_exits_1(capsys, tmp_path):
    path = tmp_path / "bad.toml"
    path.write_text('[phy]\nd_hap = "-2 m"\n')
    code, _, err = _cli(capsys, "-c", str(path), "equilibrium")
    assert code == 1
    assert "d_hap" in err and "line 2" in err
    code, _, err = _cli(capsys, "-c", str(tmp_path / "nope.toml"), "equilibrium")
    assert code == 1


def test_cli_hotboot_then_run(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(TINY_RUN)
    cache = tmp_path / "hb.json"
    code, out, _ = _cli(capsys, "-c", str(cfg), "hotboot", "--out", str(cache))
    assert code == 0
    assert json.loads(out)["I"] == 2
    assert HotbootCache.load(cache).shape == (8, 11)

    trace = tmp_path / "t.csv"
    code, out, _ = _cli(capsys, "-c", str(cfg), "run", "--hotboot", str(cache), "--trace", str(trace))
    payload = json.loads(out)
    assert code == 0
    assert [r["user"] for r in payload["runs"]] == ["hotboot-q", "hotboot-q"]
    assert len(trace.read_text().splitlines()) == 151


def test_cli_run_rejects_mismatched_cache(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(TINY_RUN)
    cache = tmp_path / "hb.json"
    _cli(capsys, "-c", str(cfg), "hotboot", "--out", str(cache))
    other = tmp_path / "other.toml"
    other.write_text(TINY_RUN + '\n[phy]\nd_hap = "10 m"\n')
    code, _, err = _cli(capsys, "-c", str(other), "run", "--hotboot", str(cache))
    assert code == 1
    assert "fingerprint" in err


def test_cli_run_single_seed(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(TINY_RUN)
    out_path = tmp_path / "r.json"
    code, out, _ = _cli(capsys, "-c", str(cfg), "run", "--seed", "4", "--out", str(out_path))
    payload = json.loads(out)
    assert code == 0
    assert [r["seed"] for r in payload["runs"]] == [4]
    assert payload["stderr"] == 0.0
    assert out_path.read_text() == out + ""


def test_cli_sweep(capsys, tmp_path):
    cfg = tmp_path / "c.toml"
    cfg.write_text(TINY_RUN + '\n[sweep]\nuser = [{ kind = "fixed", value = 0.5 }]\n')
    code, out, _ = _cli(capsys, "-c", str(cfg), "sweep", "--vary", "c_phi", "--values", "0,1")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "varied_value,strategy,seed,tail_utility,convergence_slot"
    assert len(lines) == 1 + 2 * 2
    code, _, err = _cli(capsys, "-c", str(cfg), "sweep", "--vary", "c_phi", "--values", "a,b")
    assert code == 1 and "--values" in err


def test_cli_usage_error_exits_2(capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["sweep", "--vary", "nope", "--values", "1"])
    assert exc.value.code == 2


def test_json_is_canonical(capsys):
    _, out, _ = _cli(capsys, "equilibrium")
    assert out == json.dumps(json.loads(out), sort_keys=True, indent=2) + "\n"
    assert not math.isnan(json.loads(out)["u_user"])
