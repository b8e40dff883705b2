import numpy as np
import pytest

from relight import cli, synth
from relight.config import (
    ConfigError,
    RunConfig,
    apply_overrides,
    parse_config,
    render_config,
)
from relight.frameio import read_sequence, write_sequence
from relight.solver import NumericalError


# --- config files -----------------------------------------------------------------


def test_empty_config_gives_defaults(tmp_path):
    f = tmp_path / "empty.cfg"
    f.write_text("")
    cfg = parse_config(f)
    assert cfg == RunConfig()
    assert cfg.mu == 1.0 and cfg.stages == 2 and cfg.omega == 0.01 and cfg.candidates == 8


def test_config_sections_parsed(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text(
        "[solver]\nstages = 3\nmu = 1.5\n"
        "[intra]\ncandidates = 4  # inline comment\n"
        "[degrade]\nquantize = true\n"
    )
    cfg = parse_config(f)
    assert cfg.stages == 3 and cfg.mu == 1.5 and cfg.candidates == 4 and cfg.quantize is True


def test_unknown_key_names_dotted_path(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("[solver]\nwarp_speed = 9\n")
    with pytest.raises(ConfigError, match="solver.warp_speed"):
        parse_config(f)


def test_out_of_range_names_dotted_path(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("[inter]\nomega = -1\n")
    with pytest.raises(ConfigError, match="inter.omega"):
        parse_config(f)


def test_unparsable_value(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("[solver]\nstages = many\n")
    with pytest.raises(ConfigError, match="solver.stages"):
        parse_config(f)


def test_range_pair_cross_check(tmp_path):
    f = tmp_path / "bad.cfg"
    f.write_text("[intra]\nrange_lo = 1.08\nrange_hi = 1.02\n")
    with pytest.raises(ConfigError, match="range_hi"):
        parse_config(f)


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "nope.cfg")


def test_flag_overrides_take_precedence(tmp_path):
    f = tmp_path / "run.cfg"
    f.write_text("[solver]\nstages = 3\n")
    cfg = apply_overrides(parse_config(f), {"stages": 1, "omega": None})
    assert cfg.stages == 1
    assert cfg.omega == 0.01  # None means "flag not given"


def test_override_unknown_key():
    with pytest.raises(ConfigError, match="unknown config key"):
        apply_overrides(RunConfig(), {"bogus": 1})


def test_render_parse_round_trip(tmp_path):
    cfg = RunConfig(mu=1.7, stages=3, candidates=5, quantize=True, seed=42, denoise_h=0.0)
    f = tmp_path / "echo.cfg"
    f.write_text(render_config(cfg))
    assert parse_config(f) == cfg


def test_pipeline_and_degrade_views():
    cfg = RunConfig(stages=1, omega=0.5, gain=0.25, seed=7)
    pipe = cfg.pipeline()
    assert pipe.solver.num_stages == 1
    assert pipe.inter.omega == 0.5
    assert pipe.seed == 7
    dp = cfg.degrade_params()
    assert dp.gain == 0.25 and dp.seed == 7


# --- CLI ---------------------------------------------------------------------------


def _write_clip(path, length=4, size=32, seed=150):
    seq = synth.make_sequence(size, size, length, seed=seed, channels=1, velocity=(0.5, 0.0))
    write_sequence(seq, path, "png_seq")
    return seq


def test_cli_missing_input_is_io_error(tmp_path, capsys):
    rc = cli.main(
        ["degrade", "--input", str(tmp_path / "absent"), "--output", str(tmp_path / "out")]
    )
    assert rc == cli.EXIT_IO
    assert "i/o error" in capsys.readouterr().err


def test_cli_bad_config_is_config_error(tmp_path, capsys):
    src = tmp_path / "src"
    _write_clip(src)
    bad = tmp_path / "bad.cfg"
    bad.write_text("[inter]\nomega = -1\n")
    rc = cli.main(
        ["degrade", "--config", str(bad), "--input", str(src), "--output", str(tmp_path / "out")]
    )
    assert rc == cli.EXIT_CONFIG
    assert "inter.omega" in capsys.readouterr().err


def test_cli_bad_flag_is_config_error(capsys):
    rc = cli.main(["enhance", "--no-such-flag"])
    assert rc == cli.EXIT_CONFIG


def test_cli_numerical_failure_exit_code(tmp_path, capsys, monkeypatch):
    src = tmp_path / "src"
    _write_clip(src)

    def boom(*a, **k):
        raise NumericalError("diverged")

    monkeypatch.setattr(cli, "enhance_sequence", boom)
    rc = cli.main(["enhance", "--input", str(src), "--output", str(tmp_path / "out")])
    assert rc == cli.EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_cli_degrade_writes_manifest_and_reproduces(tmp_path):
    src = tmp_path / "src"
    _write_clip(src)
    out1 = tmp_path / "dark1"
    rc = cli.main(
        [
            "degrade", "--input", str(src), "--output", str(out1),
            "--gain", "0.4", "--shot", "0.002", "--read", "0.01", "--seed", "21",
        ]
    )
    assert rc == cli.EXIT_OK
    manifest = out1 / "manifest.cfg"
    assert manifest.exists()
    echoed = parse_config(manifest)
    assert echoed.gain == 0.4 and echoed.seed == 21

    out2 = tmp_path / "dark2"
    rc = cli.main(
        ["degrade", "--config", str(manifest), "--input", str(src), "--output", str(out2)]
    )
    assert rc == cli.EXIT_OK
    files1 = sorted(out1.glob("*.png"))
    files2 = sorted(out2.glob("*.png"))
    assert files1 and len(files1) == len(files2)
    for p1, p2 in zip(files1, files2):
        assert p1.read_bytes() == p2.read_bytes()


def test_cli_build_profile_and_evaluate(tmp_path, capsys):
    src = tmp_path / "src"
    _write_clip(src, length=3)
    prof = tmp_path / "p.json"
    rc = cli.main(["build-profile", "--corpus", str(src), "--out", str(prof)])
    assert rc == cli.EXIT_OK
    assert prof.exists()
    assert "3 frames" in capsys.readouterr().out

    csv_out = tmp_path / "report.csv"
    rc = cli.main(
        ["evaluate", "--input", str(src), "--reference", str(src), "--output", str(csv_out)]
    )
    assert rc == cli.EXIT_OK
    printed = capsys.readouterr().out
    assert "psnr 100.0000" in printed and "ssim 1.0000" in printed
    lines = csv_out.read_text().strip().splitlines()
    assert lines[0] == "frame,psnr,ssim"
    assert lines[-2].startswith("warp,") and lines[-1].startswith("mabd,")


def test_cli_evaluate_without_reference(tmp_path, capsys):
    src = tmp_path / "src"
    _write_clip(src, length=3)
    rc = cli.main(["evaluate", "--input", str(src)])
    assert rc == cli.EXIT_OK
    out = capsys.readouterr().out
    assert out.startswith("warp ") and "psnr" not in out


def test_cli_enhance_identity_config_round_trip(tmp_path, capsys):
    src = tmp_path / "src"
    _write_clip(src)
    ident = tmp_path / "ident.cfg"
    ident.write_text(
        "[solver]\nstages = 1\n"
        "[intra]\nstrength = 0\ncandidates = 1\ndenoise_h = 0\n"
        "[inter]\ntau = 0\nomega = 1e9\n"
    )
    out = tmp_path / "out"
    rc = cli.main(
        ["enhance", "--config", str(ident), "--input", str(src), "--output", str(out)]
    )
    assert rc == cli.EXIT_OK
    src_seq = read_sequence(src)
    out_seq = read_sequence(out)
    for a, b in zip(src_seq.frames, out_seq.frames):
        assert float(np.max(np.abs(a - b))) <= 1.5 / 255.0
    assert (out / "manifest.cfg").exists()
    telemetry = (out / "telemetry.csv").read_text().strip().splitlines()
    assert telemetry[0] == "frame,stage,inner_iter,r_s,r_t"
    assert len(telemetry) == 1 + len(src_seq) * 3  # stages=1, inner_iters=3
    metrics_lines = (out / "metrics.csv").read_text().strip().splitlines()
    assert metrics_lines[1] == "summary,,"


def test_cli_enhance_reruns_bit_identical(tmp_path):
    src = tmp_path / "src"
    _write_clip(src)
    cfg = tmp_path / "fast.cfg"
    cfg.write_text("[solver]\nstages = 1\ninner_iters = 2\n[intra]\ncandidates = 3\n")
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = cli.main(
            [
                "enhance", "--config", str(cfg), "--seed", "5", "--threads",
                "2" if name == "b" else "1",
                "--input", str(src), "--output", str(out),
            ]
        )
        assert rc == cli.EXIT_OK
        outs.append(out)
    a_files = sorted(outs[0].glob("*.png"))
    b_files = sorted(outs[1].glob("*.png"))
    assert a_files and len(a_files) == len(b_files)
    for p1, p2 in zip(a_files, b_files):
        assert p1.read_bytes() == p2.read_bytes()
    assert (outs[0] / "telemetry.csv").read_text() == (outs[1] / "telemetry.csv").read_text()


def test_cli_enhance_with_reference_prints_fidelity(tmp_path, capsys):
    src = tmp_path / "src"
    _write_clip(src)
    cfg = tmp_path / "fast.cfg"
    cfg.write_text("[solver]\nstages = 1\ninner_iters = 1\n[intra]\ncandidates = 1\nstrength = 0\ndenoise_h = 0\n")
    out = tmp_path / "out"
    rc = cli.main(
        [
            "enhance", "--config", str(cfg), "--input", str(src),
            "--output", str(out), "--reference", str(src),
        ]
    )
    assert rc == cli.EXIT_OK
    printed = capsys.readouterr().out
    assert printed.startswith("psnr ")
    metrics_lines = (out / "metrics.csv").read_text().strip().splitlines()
    assert metrics_lines[1].startswith("0,")


def test_cli_selftest_only_filter(capsys):
    rc = cli.main(["selftest", "--only", "noise-mask,gamma-candidates"])
    assert rc == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "PASS: noise-mask" in out
    assert "PASS: gamma-candidates" in out
    assert "2/2 checks passed" in out


def test_cli_selftest_corrupt_model_fails(tmp_path, capsys):
    bad = tmp_path / "model.txt"
    bad.write_text("kind = nonsense\n")
    rc = cli.main(["selftest", "--only", "nss-features", "--model", str(bad)])
    assert rc == cli.EXIT_SELFTEST
    out = capsys.readouterr().out
    assert "FAIL: nss-features" in out
    assert "0/1 checks passed" in out


def test_cli_selftest_corrupt_profile_fails(tmp_path, capsys):
    bad = tmp_path / "profile.json"
    bad.write_text("{broken")
    rc = cli.main(["selftest", "--profile", str(bad)])
    assert rc == cli.EXIT_SELFTEST
    assert "FAIL: profile-file" in capsys.readouterr().out
