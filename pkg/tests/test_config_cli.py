import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bpre_compare.cli import main
from bpre_compare.config import RunConfig, with_sim
from bpre_compare.environment import EnvironmentFamily, FamilyKind, env_moments
from bpre_compare.exceptions import ConfigError
from bpre_compare.simulation import SimConfig

SMALL = """[bpre]
family1_kind = TwoPoint
family1_a = 0.0
family1_b = 1.0
family2_kind = ShiftedPoisson
family2_a = -0.5
family2_b = 0.5
latent_r = 0.5
n = 60
m = 45
replications = 300
master_seed = 17
"""


@pytest.fixture
def small_config(tmp_path):
    path = tmp_path / "small.ini"
    path.write_text(SMALL)
    return path


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def read_csv(path):
    lines = path.read_text().splitlines()
    return lines[0], list(csv.reader(lines[1:]))


families = st.builds(EnvironmentFamily, st.sampled_from(list(FamilyKind)),
                     st.floats(-5, 5), st.floats(0.01, 5))


@given(families, families, st.floats(-1, 1), st.integers(1, 10**6), st.integers(1, 10**6),
       st.one_of(st.none(), st.integers(10**4, 10**12)), st.integers(0, 2**64 - 1),
       st.floats(1e-6, 0.999), st.lists(st.floats(0, 10), min_size=1, max_size=5))
def test_config_round_trip(f1, f2, r, n, m, cap, seed, kappa, grid):
    sim = SimConfig(f1, f2, r, n, m, cap, seed, 5)
    cfg = RunConfig(sim=sim, kappa=kappa, x_grid=tuple(grid), output="out.csv")
    back = RunConfig.from_text(cfg.to_text())
    assert back == cfg
    assert back.digest() == cfg.digest()


@pytest.mark.parametrize("text,key", [
    ("[bpre]\nbogus = 1\n", "bogus"),
    ("[bpre]\nn = ten\n", "'n'"),
    ("[bpre]\nfamily2_kind = Uniform\n", "family2_kind"),
    ("[bpre]\nfamily1_b = 0\n", "family1_b"),
    ("[bpre]\nkappa = 1.5\n", "kappa"),
    ("[bpre]\nsuite = fast\n", "suite"),
    ("[bpre]\nformat_version = 2\n", "format_version"),
    ("[other]\nn = 3\n", "[bpre]"),
])
def test_config_errors_name_the_key(text, key):
    with pytest.raises(ConfigError, match=key.replace("[", r"\[").replace("]", r"\]")):
        RunConfig.from_text(text)


def test_moments(small_config, capsys):
    assert main(["moments", str(small_config)]) == 0
    out = json.loads(capsys.readouterr().out)
    p = env_moments(EnvironmentFamily.two_point(0, 1))
    assert out["family1"]["mu"] == p.mu and out["family1"]["sigma"] == p.sigma
    assert out["format_version"] == 1 and len(out["config_digest"]) == 64
    assert out["rho"] > 0


def test_moments_zero_latent(tmp_path, capsys):
    path = write(tmp_path, "c.ini", "[bpre]\nlatent_r = 0\n")
    assert main(["moments", path]) == 0
    assert json.loads(capsys.readouterr().out)["rho"] == 0


def test_malformed_config_exit_code(tmp_path, capsys):
    path = write(tmp_path, "bad.ini", "[bpre]\nn = 3\nlaten_r = 0.5\n")
    assert main(["moments", path]) == 1
    assert "laten_r" in capsys.readouterr().err


def test_simulate_schema_and_determinism(small_config, tmp_path):
    a, b, c = tmp_path / "a.csv", tmp_path / "b.csv", tmp_path / "c.csv"
    assert main(["simulate", str(small_config), "-o", str(a), "--workers", "1"]) == 0
    assert main(["simulate", str(small_config), "-o", str(b), "--workers", "1"]) == 0
    assert main(["simulate", str(small_config), "-o", str(c), "--workers", "3"]) == 0
    assert a.read_bytes() == b.read_bytes() == c.read_bytes()
    comment, rows = read_csv(a)
    digest = RunConfig.load(small_config).digest()
    assert comment == f"# format_version=1 config_digest={digest}"
    assert rows[0] == ["replication", "logZ1", "logZ2", "r"]
    assert len(rows) == 301 and rows[1][0] == "0"


def test_simulate_trajectories(small_config, tmp_path):
    out, traj = tmp_path / "s.csv", tmp_path / "t.csv"
    assert main(["simulate", str(small_config), "-o", str(out), "--trajectories", str(traj)]) == 0
    comment, rows = read_csv(traj)
    assert comment.startswith("# format_version=1 config_digest=")
    assert rows[0] == ["replication", "process", "generation", "M", "logZ", "logW", "exact_flag"]
    assert len(rows) == 1 + 300 * (60 + 45)
    _, sims = read_csv(out)
    last = [r for r in rows[1:] if r[0] == "299" and r[1] == "1"][-1]
    assert float(last[4]) == float(sims[-1][1])


def test_simulate_io_error(small_config, capsys):
    assert main(["simulate", str(small_config), "-o", "/nonexistent/dir/x.csv"]) == 3
    assert main(["moments", "/nonexistent/cfg.ini"]) == 3


def test_simulate_mean_r_is_centred(tmp_path, capsys):
    path = write(tmp_path, "c.ini", "[bpre]\nn = 1000\nm = 1000\nreplications = 10000\n"
                                    "latent_r = 0.5\nmaster_seed = 5\n")
    assert main(["simulate", path]) == 0
    lines = capsys.readouterr().out.splitlines()[2:]
    r = np.array([float(line.split(",")[3]) for line in lines])
    assert abs(r.mean()) <= 3 * r.std() / math.sqrt(r.size)


def test_ci_worked_example(capsys):
    argv = ["ci", "--logz1", "105", "--logz2", "98", "--n", "100", "--m", "100",
            "--sigma1", "1", "--sigma2", "1", "--rho", "0", "--kappa", "0.05"]
    assert main(argv) == 0
    rec = json.loads(capsys.readouterr().out)
    assert (rec["lo"], rec["hi"]) == pytest.approx((-0.2072, 0.3472), abs=1e-4)
    assert rec["method"] == "MuDiff" and rec["warnings"] == []
    assert main(argv[:-1] + ["0.01"]) == 0
    tighter = json.loads(capsys.readouterr().out)
    assert tighter["lo"] < rec["lo"] and tighter["hi"] > rec["hi"]


def test_ci_missing_flags_is_usage_error(capsys):
    assert main(["ci", "--logz1", "105", "--logz2", "98", "--n", "100"]) == 1
    assert "--sigma1" in capsys.readouterr().err
    with pytest.raises(SystemExit) as exc:
        main(["ci", "--logz1", "abc"])
    assert exc.value.code == 1


def test_ci_sigma_requires_attestation(capsys):
    argv = ["ci-sigma", "--logz1", "2", "--logz2", "0", "--n", "100"]
    assert main(argv) == 1
    assert "independent" in capsys.readouterr().err
    assert main(argv + ["--independent-copies"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["lo"] == pytest.approx(0.003981, abs=1e-6)
    assert main(["ci", "--method", "sigma-sq", "--logz1", "2", "--logz2", "0", "--n", "100"]) == 1


def test_ci_and_test_from_sim(small_config, tmp_path, capsys):
    assert main(["test", str(small_config), "--from-sim", "--replication", "3"]) == 0
    rec = json.loads(capsys.readouterr().out)
    assert rec["config_digest"] == RunConfig.load(small_config).digest()
    assert rec["decision"] == (rec["p_value"] < 0.05)
    assert main(["ci", str(small_config), "--from-sim"]) == 0
    assert json.loads(capsys.readouterr().out)["method"] == "MuDiff"
    # the small config pairs different families, so the sigma^2 design is refused
    assert main(["ci-sigma", str(small_config), "--from-sim", "--independent-copies"]) == 1


def test_ci_warnings_in_output(capsys):
    argv = ["ci", "--logz1", "10", "--logz2", "9", "--n", "20", "--m", "20",
            "--sigma1", "1", "--sigma2", "1", "--rho", "0", "--kappa", "1e-4"]
    assert main(argv) == 0
    assert len(json.loads(capsys.readouterr().out)["warnings"]) == 2


def test_verify_normal_injection(tmp_path, capsys):
    path = write(tmp_path, "v.ini", "[bpre]\nreplications = 20000\nsuite = clt\n"
                                    "source = normal\n")
    out, summ = tmp_path / "r.csv", tmp_path / "s.json"
    assert main(["verify", path, "-o", str(out), "--summary", str(summ)]) == 0
    assert capsys.readouterr().out.startswith("PASS suite=clt")
    comment, rows = read_csv(out)
    assert comment.startswith("# format_version=1")
    assert rows[0] == ["diagnostic", "x", "value", "envelope_lo", "envelope_hi", "pass"]
    summary = json.loads(summ.read_text())
    assert summary["passed"] and summary["format_version"] == 1


def test_verify_failure_exit_code(tmp_path, capsys):
    # n = m = 20 is far from the normal limit, so the tight envelopes fail
    path = write(tmp_path, "v.ini", "[bpre]\nn = 20\nm = 20\nreplications = 20000\n"
                                    "suite = clt\nlatent_r = 0.5\n")
    out, summ = tmp_path / "r.csv", tmp_path / "s.json"
    assert main(["verify", path, "-o", str(out), "--summary", str(summ)]) == 2
    assert "failed ks" in capsys.readouterr().err
    assert json.loads(summ.read_text())["failures"]


def test_verify_coverage_suite(tmp_path, capsys):
    path = write(tmp_path, "v.ini", "[bpre]\nn = 1000\nm = 1000\nlatent_r = 0.5\n"
                                    "family2_a = 0.3\nsuite = coverage\n"
                                    "coverage_replications = 10000\nmaster_seed = 2\n")
    out, summ = tmp_path / "r.csv", tmp_path / "s.json"
    code = main(["verify", path, "-o", str(out), "--summary", str(summ)])
    summary = json.loads(summ.read_text())
    assert 0.94 <= summary["coverage"] <= 0.96
    assert code == 0, summary["failures"]


def test_with_sim_helper():
    cfg = with_sim(RunConfig(), n=7)
    assert cfg.sim.n == 7 and RunConfig().sim.n == 100
