import io
import subprocess
import sys

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aqsig.adversary import AttackKind
from aqsig.cli import (
    CampaignConfig,
    RunConfig,
    UsageError,
    build_parser,
    cmd_run,
    cmd_selftest,
    main,
    parse_campaign_config,
    parse_run_config,
    read_message_file,
)
from aqsig.protocol import Mode, Variant
from aqsig.quantum import CORRECTION_TABLE, BellOutcome, QubitSpec, XOutcome


def run_main(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


class TestRun:
    def test_accepted_exit_zero(self, capsys):
        code, out, _ = run_main(["run", "--n", "3", "--seed", "1"], capsys)
        assert code == 0
        assert out.splitlines()[-1].split()[4:6] == ["kind=report", "accepted=true"]

    def test_transcript_is_deterministic(self, tmp_path):
        outs = []
        for name in ("a.txt", "b.txt"):
            path = tmp_path / name
            assert cmd_run(RunConfig(n=4, seed=9, out=str(path)), stdout=io.StringIO()) == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_out_file_prints_report_line(self, tmp_path, capsys):
        path = tmp_path / "t.txt"
        code, out, _ = run_main(["run", "--n", "2", "--out", str(path)], capsys)
        assert code == 0
        assert out.strip() == path.read_text().splitlines()[-1]

    def test_table_format(self, capsys):
        code, out, _ = run_main(["run", "--n", "2", "--format", "table"], capsys)
        assert code == 0
        lines = out.splitlines()
        assert lines[0].split() == ["qubit", "fidelity"]
        assert lines[-1] == "accepted=true gamma=1 reject_reason=none"

    @pytest.mark.parametrize("mode", ["deferred", "paper"])
    @pytest.mark.parametrize("variant", ["base", "undeniable"])
    def test_modes_and_variants(self, capsys, mode, variant):
        code, out, _ = run_main(["run", "--n", "2", "--mode", mode, "--variant", variant], capsys)
        assert code == 0
        assert f"mode={mode}" in out.splitlines()[-1]

    def test_short_key_is_usage_error(self, capsys):
        code, out, err = run_main(["run", "--n", "4", "--key-length", "64"], capsys)
        assert code == 2
        assert out.splitlines()[-1].endswith("kind=error error=PadExhausted")
        assert "PadExhausted" in err

    @pytest.mark.parametrize(
        "argv",
        [
            ["run", "--n", "0"],
            ["run", "--key-length", "0"],
            ["run", "--mode", "eager"],
            ["run", "--message", "/nonexistent/file"],
            ["frobnicate"],
            [],
        ],
    )
    def test_usage_errors(self, capsys, argv):
        assert run_main(argv, capsys)[0] == 2


class TestMessageFile:
    def test_parse(self, tmp_path):
        path = tmp_path / "m.txt"
        path.write_text("# two qubits\n1 0 0 0\n\n0.6 0 0 0.8\n")
        assert read_message_file(str(path)) == (QubitSpec(1, 0), QubitSpec(0.6, 0.8j))

    @pytest.mark.parametrize("text", ["1 0 0\n", "1 0 0 1\n", "a b c d\n", "# nothing\n"])
    def test_rejects_bad_files(self, tmp_path, text):
        path = tmp_path / "m.txt"
        path.write_text(text)
        with pytest.raises(UsageError):
            read_message_file(str(path))

    def test_run_with_file(self, tmp_path, capsys):
        path = tmp_path / "m.txt"
        path.write_text("1 0 0 0\n0 0 1 0\n0.6 0 0 0.8\n")
        code, out, _ = run_main(["run", "--message", str(path)], capsys)
        assert code == 0
        assert '"n": 3' in bytes.fromhex(out.splitlines()[0].split("payload_hex=")[1]).decode()

    def test_n_must_match_file(self, tmp_path, capsys):
        path = tmp_path / "m.txt"
        path.write_text("1 0 0 0\n")
        assert run_main(["run", "--n", "2", "--message", str(path)], capsys)[0] == 2


class TestAttack:
    def test_row(self, capsys):
        code, out, _ = run_main(["attack", "--attack", "OutsiderSwapMessage", "--trials", "5", "--n", "2"], capsys)
        assert code == 0
        assert out.strip() == "attack=OutsiderSwapMessage n=2 trials=5 detected=5 rate=1.0000 seed=0"

    def test_table(self, capsys):
        code, out, _ = run_main(
            ["attack", "--attack", "AliceDisavow", "--trials", "3", "--format", "table"], capsys
        )
        assert code == 0
        assert out.splitlines()[0].split() == ["attack", "n", "trials", "detected", "rate", "seed"]

    def test_unknown_attack_lists_valid_names(self, capsys):
        code, _, err = run_main(["attack", "--attack", "Nope"], capsys)
        assert code == 2
        for kind in AttackKind:
            assert kind.value in err

    @pytest.mark.parametrize("flag", ["--trials", "--n"])
    def test_non_positive(self, capsys, flag):
        assert run_main(["attack", "--attack", "AliceDisavow", flag, "0"], capsys)[0] == 2


class TestSelftest:
    def test_passes(self, capsys):
        code, out, _ = run_main(["selftest"], capsys)
        assert code == 0
        assert out.split() == ["PASS", "correction_table", "PASS", "bob_marginals", "PASS", "sampler_vs_oracle"]

    def test_transposed_entry_fails(self):
        table = dict(CORRECTION_TABLE)
        a = (BellOutcome.PsiPlus, XOutcome.MinusX)
        b = (BellOutcome.PhiPlus, XOutcome.PlusX)
        table[a], table[b] = table[b], table[a]
        buf = io.StringIO()
        assert cmd_selftest(table, stdout=buf) == 1
        text = buf.getvalue()
        assert "correction (PsiPlus, MinusX) -> SigmaX" in text
        assert "correction (PhiPlus, PlusX) -> SigmaZ" in text


class TestConfigRoundTrip:
    @settings(max_examples=40, deadline=None)
    @given(
        st.one_of(st.none(), st.integers(1, 64)),
        st.integers(0, 2**31),
        st.sampled_from(list(Mode)),
        st.sampled_from(list(Variant)),
        st.one_of(st.none(), st.integers(1, 10**6)),
        st.sampled_from(["text-lines", "table"]),
        st.one_of(st.none(), st.just("out.txt")),
    )
    def test_run_config(self, n, seed, mode, variant, key_length, fmt, out):
        config = RunConfig(n, seed, mode, variant, "haar", key_length, out, fmt)
        assert parse_run_config(build_parser().parse_args(config.to_argv())) == config

    @settings(max_examples=40, deadline=None)
    @given(
        st.sampled_from(list(AttackKind)),
        st.integers(1, 10**4),
        st.integers(1, 64),
        st.integers(0, 2**31),
        st.sampled_from(list(Mode)),
        st.sampled_from(["text-lines", "table"]),
    )
    def test_campaign_config(self, kind, trials, n, seed, mode, fmt):
        config = CampaignConfig(kind, trials, n, seed, mode, fmt)
        assert parse_campaign_config(build_parser().parse_args(config.to_argv())) == config

    def test_defaults(self):
        config = parse_run_config(build_parser().parse_args(["run"]))
        assert config == RunConfig()
        assert (config.mode, config.variant, config.format) == (Mode.Deferred, Variant.Base, "text-lines")


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "aqsig", "run", "--n", "1", "--seed", "4"],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0
    assert "accepted=true" in proc.stdout.splitlines()[-1]
