"""Command-line front end.

    aqsig run [--n N] [--seed S] [--mode deferred|paper] [--variant base|undeniable]
              [--message haar|PATH] [--key-length BITS] [--out PATH] [--format text-lines|table]
    aqsig attack --attack NAME [--trials T] [--n N] [--seed S] [--format ...]
    aqsig selftest

Exit status: 0 accepted / pass, 1 rejected / fail, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .adversary import AttackKind, run_attack
from .checks import selftest
from .protocol import Mode, ProtocolConfig, Variant, run_protocol
from .quantum import QubitSpec

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
FORMATS = ("text-lines", "table")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    n: Optional[int] = None
    seed: int = 0
    mode: Mode = Mode.Deferred
    variant: Variant = Variant.Base
    message: str = "haar"
    key_length: Optional[int] = None
    out: Optional[str] = None
    format: str = "text-lines"

    def to_argv(self) -> List[str]:
        argv = ["run", "--seed", str(self.seed), "--mode", self.mode.value,
                "--variant", self.variant.value, "--message", self.message,
                "--format", self.format]
        if self.n is not None:
            argv += ["--n", str(self.n)]
        if self.key_length is not None:
            argv += ["--key-length", str(self.key_length)]
        if self.out is not None:
            argv += ["--out", self.out]
        return argv


@dataclass(frozen=True)
class CampaignConfig:
    attack: AttackKind
    trials: int = 100
    n: int = 8
    seed: int = 0
    mode: Mode = Mode.Deferred
    format: str = "text-lines"

    def to_argv(self) -> List[str]:
        return ["attack", "--attack", self.attack.value, "--trials", str(self.trials),
                "--n", str(self.n), "--seed", str(self.seed), "--mode", self.mode.value,
                "--format", self.format]


def read_message_file(path: str) -> Tuple[QubitSpec, ...]:
    """One qubit per line: re(alpha) im(alpha) re(beta) im(beta).

    Blank lines and lines starting with '#' are skipped.
    """
    qubits = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split()
        if len(fields) != 4:
            raise UsageError(f"{path}:{lineno}: expected 4 reals, got {len(fields)}")
        try:
            ar, ai, br, bi = map(float, fields)
            qubits.append(QubitSpec(complex(ar, ai), complex(br, bi)))
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from exc
    if not qubits:
        raise UsageError(f"{path}: no qubits")
    return tuple(qubits)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aqsig", description="Arbitrated quantum signature simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    mode_choices = [m.value for m in Mode]

    run = sub.add_parser("run", help="run one protocol instance and write its transcript")
    run.add_argument("--n", type=int, default=None, help="message qubits (default 8, or the file length)")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--mode", choices=mode_choices, default=Mode.Deferred.value)
    run.add_argument("--variant", choices=[v.value for v in Variant], default=Variant.Base.value)
    run.add_argument("--message", default="haar", help='"haar" or a path to an amplitude file')
    run.add_argument("--key-length", type=int, default=None,
                     help="bits per key (default: exactly what the run consumes)")
    run.add_argument("--out", default=None, help="transcript path (default stdout)")
    run.add_argument("--format", choices=FORMATS, default="text-lines")

    attack = sub.add_parser("attack", help="run an attack campaign and print detection statistics")
    attack.add_argument("--attack", required=True, help="one of: " + ", ".join(a.value for a in AttackKind))
    attack.add_argument("--trials", type=int, default=100)
    attack.add_argument("--n", type=int, default=8)
    attack.add_argument("--seed", type=int, default=0)
    attack.add_argument("--mode", choices=mode_choices, default=Mode.Deferred.value)
    attack.add_argument("--format", choices=FORMATS, default="text-lines")

    sub.add_parser("selftest", help="check the correction table, marginals and sampler")
    return parser


def parse_run_config(args: argparse.Namespace) -> RunConfig:
    return RunConfig(args.n, args.seed, Mode(args.mode), Variant(args.variant),
                     args.message, args.key_length, args.out, args.format)


def parse_campaign_config(args: argparse.Namespace) -> CampaignConfig:
    try:
        kind = AttackKind(args.attack)
    except ValueError:
        raise UsageError(
            f"unknown attack {args.attack!r}; valid: " + ", ".join(a.value for a in AttackKind)
        ) from None
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    return CampaignConfig(kind, args.trials, args.n, args.seed, Mode(args.mode), args.format)


def _protocol_config(config: RunConfig) -> ProtocolConfig:
    message = None
    n = config.n
    if config.message != "haar":
        try:
            message = read_message_file(config.message)
        except OSError as exc:
            raise UsageError(f"cannot read message file: {exc}") from exc
        if n is None:
            n = len(message)
        elif n != len(message):
            raise UsageError(f"--n {n} but {config.message} holds {len(message)} qubits")
    if n is None:
        n = 8
    if n < 1:
        raise UsageError("--n must be at least 1")
    if config.key_length is not None and config.key_length < 1:
        raise UsageError("--key-length must be positive")
    return ProtocolConfig(n, config.seed, config.mode, config.variant, message, config.key_length)


def _table(headers: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    cells = [list(map(str, headers))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(headers))]
    lines = ["  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def cmd_run(config: RunConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    pconf = _protocol_config(config)
    transcript = run_protocol(pconf)
    text = transcript.to_text()
    if config.out is not None:
        try:
            Path(config.out).write_text(text)
        except OSError as exc:
            raise UsageError(f"cannot write transcript: {exc}") from exc
    elif config.format == "text-lines":
        stdout.write(text)

    if transcript.report is None:
        print(f"error: run aborted ({transcript.error})", file=sys.stderr)
        return EXIT_USAGE
    report = transcript.report
    if config.format == "table":
        rows = [(i, f"{f:.12f}") for i, f in enumerate(report.per_qubit_fidelity)]
        print(_table(["qubit", "fidelity"], rows), file=stdout)
        reason = report.reject_reason.value if report.reject_reason else "none"
        print(f"accepted={'true' if report.accepted else 'false'} gamma={report.gamma} reject_reason={reason}",
              file=stdout)
    elif config.out is not None:
        print(transcript.lines()[-1], file=stdout)
    return EXIT_OK if report.accepted else EXIT_FAIL


def cmd_attack(config: CampaignConfig, stdout=None) -> int:
    stdout = stdout or sys.stdout
    stats = run_attack(config.attack, config.trials, config.n, config.seed, mode=config.mode)
    if config.format == "table":
        print(_table(["attack", "n", "trials", "detected", "rate", "seed"],
                     [(stats.attack.value, stats.n, stats.trials, stats.detected,
                       f"{stats.rate:.4f}", stats.seed)]), file=stdout)
    else:
        print(stats.to_row(), file=stdout)
    return EXIT_OK


def cmd_selftest(table=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    ok = True
    for name, failures in selftest(table).items():
        if failures:
            ok = False
            for f in failures:
                print(f"FAIL {name}: {f}", file=stdout)
        else:
            print(f"PASS {name}", file=stdout)
    return EXIT_OK if ok else EXIT_FAIL


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_USAGE
    try:
        if args.command == "run":
            return cmd_run(parse_run_config(args))
        if args.command == "attack":
            return cmd_attack(parse_campaign_config(args))
        return cmd_selftest()
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"aqsig: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
