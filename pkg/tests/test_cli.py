"""End-to-end tests of the command line (in-process via cli.main)."""

import json

import numpy as np
import pytest

from iterlib import cli, mixture


def run(argv):
    return cli.main(argv)


def read_csv(path):
    with open(path) as handle:
        header = handle.readline().strip().split(",")
        rows = [
            [float(v) for v in line.strip().split(",")]
            for line in handle
            if line.strip()
        ]
    return header, np.array(rows)


def test_simulate_shape_and_determinism(tmp_path, capsys):
    out1 = tmp_path / "a.csv"
    out2 = tmp_path / "b.csv"
    argv = [
        "simulate", "--process", "bm", "--depth", "3", "--times", "1,2.5",
        "--samples", "50", "--seed", "9",
    ]
    assert run(argv + ["--out", str(out1)]) == 0
    assert run(argv + ["--out", str(out2)]) == 0
    assert out1.read_text() == out2.read_text()
    header, rows = read_csv(out1)
    assert header == ["x_t1", "x_t2.5"]
    assert rows.shape == (50, 2)
    assert "overflow: 0" in capsys.readouterr().err


def test_simulate_reports_overflow(tmp_path, capsys):
    out = tmp_path / "d.csv"
    rc = run(
        [
            "simulate", "--process", "stable", "--alpha", "0.8", "--depth", "40",
            "--times", "1", "--samples", "300", "--seed", "3", "--out", str(out),
        ]
    )
    assert rc == 0
    err = capsys.readouterr().err
    assert "overflow:" in err
    count = int(err.split("overflow:")[1].split()[0])
    assert count > 0


def test_simulate_roundtrip_precision(tmp_path):
    out = tmp_path / "p.csv"
    run(
        [
            "simulate", "--process", "bm", "--depth", "2", "--times", "1",
            "--samples", "20", "--seed", "1", "--out", str(out),
        ]
    )
    _, rows = read_csv(out)
    from iterlib import samplers

    rng = samplers.RandomStream(1).generator()
    direct = samplers.iterate_fdd(np.ones((20, 1)), 2, cli.BROWNIAN, rng)
    np.testing.assert_array_equal(rows, direct)  # 17 digits survive the trip


def test_exact_writes_samples_and_mixture(tmp_path):
    out = tmp_path / "e.csv"
    rc = run(
        [
            "exact", "--depth", "3", "--rates", "1,1", "--samples", "40",
            "--seed", "2", "--out", str(out),
        ]
    )
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["x1", "x2"] and rows.shape == (40, 2)
    mix = mixture.mixture_from_json((tmp_path / "e.mixture.json").read_text())
    assert isinstance(mix, mixture.EncodingMixture)
    assert mix.weights.sum() == pytest.approx(1.0)


def test_exact_k_mismatch_rejected(tmp_path):
    rc = run(
        [
            "exact", "--k", "3", "--depth", "1", "--rates", "1,1",
            "--samples", "5", "--out", str(tmp_path / "x.csv"),
        ]
    )
    assert rc == 2


def test_param_chain_k1(tmp_path):
    out = tmp_path / "pc.csv"
    rc = run(
        [
            "param-chain", "--k", "1", "--steps", "200", "--burn-in", "100",
            "--thin", "1", "--seed", "4", "--out", str(out),
        ]
    )
    assert rc == 0
    _, rows = read_csv(out)
    assert np.allclose(rows, 2.0, atol=1e-9)


def test_attractor_boxes_and_plot(tmp_path):
    out = tmp_path / "boxes.csv"
    rc = run(
        [
            "attractor", "--k", "2", "--method", "boxes", "--depth", "4",
            "--resolution", "6/64", "--out", str(out), "--plot",
        ]
    )
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["c1", "c2"]
    assert rows.min() >= 2.0 and rows.max() <= 8.0
    assert (tmp_path / "boxes.png").exists()


def test_attractor_chaos(tmp_path):
    out = tmp_path / "cloud.csv"
    rc = run(
        [
            "attractor", "--k", "2", "--method", "chaos", "--steps", "2000",
            "--burn-in", "100", "--seed", "5", "--out", str(out),
        ]
    )
    assert rc == 0
    _, rows = read_csv(out)
    assert rows.shape == (1900, 2)


def test_occupation_csv_format(tmp_path):
    out = tmp_path / "occ.csv"
    rc = run(
        [
            "occupation", "--process", "bm", "--depth", "0", "--points", "1000",
            "--bins", "10", "--clip", "0,1", "--seed", "6", "--out", str(out),
            "--plot",
        ]
    )
    assert rc == 0
    header, rows = read_csv(out)
    assert header == ["bin_left", "bin_right", "count", "density"]
    assert rows[:, 2].sum() == 1000
    assert (tmp_path / "occ.png").exists()


def test_verify_quick_json_and_exit(tmp_path):
    out = tmp_path / "report.json"
    rc = run(
        [
            "verify", "--suite", "reflected", "--quick", "--seed", "3",
            "--threads", "1", "--out", str(out), "--plot",
        ]
    )
    reports = json.loads(out.read_text())
    assert {r["name"] for r in reports} == {"reflected"}
    assert rc == (0 if all(r["verdict"] == "pass" for r in reports) else 1)
    assert (tmp_path / "report.png").exists()


def test_config_file_and_flag_override(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        json.dumps(
            {
                "process": "bm", "depth": 2, "times": "1", "samples": 10,
                "seed": 11, "out": str(tmp_path / "cfg_out.csv"),
            }
        )
    )
    assert run(["simulate", "--config", str(cfg)]) == 0
    assert (tmp_path / "cfg_out.csv").exists()
    # explicit flag wins over the config value
    override = tmp_path / "override.csv"
    assert run(["simulate", "--config", str(cfg), "--out", str(override)]) == 0
    assert override.exists()


def test_env_seed_default(tmp_path, monkeypatch):
    monkeypatch.setenv("ITERLIB_SEED", "123")
    a = tmp_path / "env_a.csv"
    b = tmp_path / "env_b.csv"
    argv = ["simulate", "--process", "bm", "--depth", "1", "--times", "1",
            "--samples", "5"]
    run(argv + ["--out", str(a)])
    run(argv + ["--out", str(b)])
    assert a.read_text() == b.read_text()
    monkeypatch.setenv("ITERLIB_SEED", "124")
    c = tmp_path / "env_c.csv"
    run(argv + ["--out", str(c)])
    assert a.read_text() != c.read_text()


def test_unknown_flag_exits_2():
    with pytest.raises(SystemExit) as exc:
        cli.build_parser().parse_args(["simulate", "--nope"])
    assert exc.value.code == 2


def test_missing_required_reports_field(tmp_path, capsys):
    rc = run(["simulate", "--process", "bm", "--out", str(tmp_path / "x.csv")])
    assert rc == 2
    assert "--times" in capsys.readouterr().err


def test_no_temp_files_left(tmp_path):
    out = tmp_path / "clean.csv"
    run(
        [
            "simulate", "--process", "bm", "--depth", "1", "--times", "1",
            "--samples", "5", "--seed", "1", "--out", str(out),
        ]
    )
    assert sorted(p.name for p in tmp_path.iterdir()) == ["clean.csv"]


def test_bad_config_json_exits_2(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text("{not json")
    rc = run(["simulate", "--config", str(cfg)])
    assert rc == 2


SUBCOMMAND_FLAGS = {
    "simulate": ["--process", "--alpha", "--sigma", "--r", "--depth", "--times",
                 "--samples", "--out", "--seed", "--config"],
    "exact": ["--k", "--depth", "--rates", "--labelling", "--samples",
              "--prune-max", "--out", "--seed", "--config"],
    "param-chain": ["--k", "--steps", "--burn-in", "--thin", "--variant",
                    "--start", "--out", "--seed", "--config"],
    "attractor": ["--k", "--method", "--depth", "--resolution", "--upper",
                  "--steps", "--burn-in", "--out", "--plot", "--seed", "--config"],
    "occupation": ["--process", "--alpha", "--sigma", "--r", "--depth",
                   "--points", "--bins", "--clip", "--out", "--plot", "--seed",
                   "--config"],
    "verify": ["--suite", "--quick", "--threads", "--out", "--plot", "--seed",
               "--config"],
}


@pytest.mark.parametrize("command", sorted(SUBCOMMAND_FLAGS))
def test_help_documents_all_flags(command, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.build_parser().parse_args([command, "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for flag in SUBCOMMAND_FLAGS[command]:
        assert flag in text


def test_exact_deterministic(tmp_path):
    argv = ["exact", "--depth", "2", "--rates", "1,2", "--samples", "30",
            "--seed", "8"]
    run(argv + ["--out", str(tmp_path / "a.csv")])
    run(argv + ["--out", str(tmp_path / "b.csv")])
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()
    assert (
        (tmp_path / "a.mixture.json").read_text()
        == (tmp_path / "b.mixture.json").read_text()
    )
