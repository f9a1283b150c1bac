"""Command-line front end.

Every run writes one JSON report (sorted keys, no timestamps) so that the same
configuration and seed give a byte-identical file. Wall-clock time goes to a
``<output>.timing.json`` sidecar. Exit status: 0 when every check in the run
passes, 1 when one fails, 2 on an invalid configuration, 3 when a resource
cap is hit.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from . import CosetLabError, ParameterError, ResourceError, __version__
from . import copy_protect as cp
from . import games, suites
from .lemmas import CHECKS, lemma_suite

SCHEMA_VERSION = 1
WORKERS_ENV = "COSETLAB_WORKERS"


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    seed: int
    trials: int = 100
    scheme: str | None = None
    variant: str | None = None
    adversary: str | None = None
    k: int = 1
    cheat: bool = False
    on_mismatch: str = "abstain"
    noninteractive: bool = False
    expect: float | None = None
    n: int = 4
    d: int = 2
    c: int = 3
    id_bits: int = 32
    q: int = 32
    dims: int = 4
    epsilon: float = 0.05
    delta: float = 0.05
    lemmas: tuple = field(default_factory=tuple)
    output: str | None = None
    csv: str | None = None
    trace: bool = False

    def validate(self):
        if self.trials < 1:
            raise ParameterError("--trials must be at least 1")
        if self.command in ("moe", "antipiracy") and self.adversary is None:
            raise ParameterError(f"{self.command} needs --adversary")
        if self.expect is not None and not 0 <= self.expect <= 1:
            raise ParameterError("--expect must be a probability")
        cp.CpParams(self.n, self.d, self.c, self.id_bits)

    def echo(self) -> dict:
        out = asdict(self)
        for key in ("output", "csv"):
            out.pop(key)
        out["lemmas"] = list(self.lemmas)
        return out


def workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        raise ParameterError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None


def _strategy(cfg: ExperimentConfig) -> games.AdversaryStrategy:
    params = {"k": cfg.k, "cheat": cfg.cheat, "on_mismatch": cfg.on_mismatch}
    return games.AdversaryStrategy(cfg.adversary, params)


def _game_chunk(cfg: ExperimentConfig, start: int, count: int) -> games.GameReport:
    if cfg.command == "moe":
        params = games.MoeParams(cfg.n, cfg.d, cfg.c, cfg.id_bits)
        return games.run_moe(cfg.variant, _strategy(cfg), params, count, cfg.seed, trace=cfg.trace, start=start)
    params = games.AntiPiracyParams(cfg.n, cfg.d, cfg.c, cfg.id_bits, cfg.q, noninteractive=cfg.noninteractive)
    return games.run_antipiracy(cfg.scheme, _strategy(cfg), params, count, cfg.seed, trace=cfg.trace, start=start)


def _run_game(cfg: ExperimentConfig) -> dict:
    n_workers = min(workers(), cfg.trials)
    bounds = [(cfg.trials * i // n_workers, cfg.trials * (i + 1) // n_workers) for i in range(n_workers)]
    chunks = [(a, b - a) for a, b in bounds if b > a]
    if len(chunks) == 1:
        parts = [_game_chunk(cfg, 0, cfg.trials)]
    else:
        with ProcessPoolExecutor(len(chunks)) as pool:
            parts = list(pool.map(_game_chunk, [cfg] * len(chunks), *zip(*chunks)))
    report = parts[0]
    for p in parts[1:]:
        report = report.merge(p)
    checks = []
    if cfg.expect is not None:
        checks.append({"name": f"ci95 contains {cfg.expect}", "pass": report.contains(cfg.expect)})
    if report.per_trial_traces is not None:
        agree = all(
            games.check_trace(report.game_id, t) == bool(t.get("verdict", {}).get("win", False))
            for t in report.per_trial_traces
        )
        checks.append({"name": "trace verdicts recompute", "pass": agree})
    return {"report": report.to_json(), "checks": checks}


def _run_correctness(cfg: ExperimentConfig) -> dict:
    params = cp.CpParams(cfg.n, cfg.d, cfg.c, cfg.id_bits)
    schemes = list(suites.CORRECTNESS) if cfg.scheme in (None, "all") else [cfg.scheme]
    out = {}
    for name in schemes:
        if name == "cp-pke":
            out[name] = suites.cp_pke_roundtrips(cfg.seed, params, cfg.trials)
        elif name == "cp-fe":
            out[name] = suites.cp_fe_roundtrips(cfg.seed, params, cfg.trials, cfg.q)
        elif name == "coset":
            out[name] = suites.coset_duality(cfg.seed, cfg.trials)
        else:
            out[name] = suites.CORRECTNESS[name](cfg.seed)
    return {"report": out, "checks": [{"name": k, "pass": v["pass"]} for k, v in out.items()]}


def _run_lemmas(cfg: ExperimentConfig) -> dict:
    rep = lemma_suite(cfg.seed, dims=cfg.dims, trials=cfg.trials, lemmas=cfg.lemmas or None)
    return {"report": rep.to_json(), "checks": [{"name": r.lemma_id, "pass": r.passed} for r in rep.results]}


def _run_bench(cfg: ExperimentConfig) -> dict:
    # counts only; the times land in the sidecar
    lab = suites.measurement_lab(cfg.seed, instances=cfg.trials, api_trials=100 * cfg.trials,
                                 epsilon=cfg.epsilon, delta=cfg.delta, sandwich_instances=cfg.trials)
    return {"report": {"measurement_lab": lab}, "checks": [{"name": "measurement_lab", "pass": lab["pass"]}]}


RUNNERS = {
    "correctness": _run_correctness,
    "moe": _run_game,
    "antipiracy": _run_game,
    "lemmas": _run_lemmas,
    "bench": _run_bench,
}


def run_experiment(cfg: ExperimentConfig) -> tuple[int, dict, float]:
    """Returns ``(exit status, report, seconds)``."""
    cfg.validate()
    t0 = time.perf_counter()
    body = RUNNERS[cfg.command](cfg)
    elapsed = time.perf_counter() - t0
    ok = all(c["pass"] for c in body["checks"])
    report = {
        "schema_version": SCHEMA_VERSION,
        "version": __version__,
        "config": cfg.echo(),
        "results": body["report"],
        "checks": body["checks"],
        "pass": ok,
    }
    return (0 if ok else 1), report, elapsed


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=True) + "\n"


def _write_csv(path: str, report: dict) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["command", "seed", "check", "pass"])
        for c in report["checks"]:
            w.writerow([report["config"]["command"], report["config"]["seed"], c["name"], int(c["pass"])])


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cosetlab", description="Coset-state copy-protection lab.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, trials=100):
        sp.add_argument("--seed", type=int, required=True)
        sp.add_argument("--trials", type=int, default=trials)
        sp.add_argument("--output", "-o", help="report path (default: stdout)")
        sp.add_argument("--csv", help="optional CSV summary path")
        sp.add_argument("--trace", action="store_true", help="include per-trial traces")

    def cosets(sp):
        sp.add_argument("--n", type=int, default=4)
        sp.add_argument("--d", type=int, default=2)
        sp.add_argument("--c", type=int, default=3)
        sp.add_argument("--id-bits", type=int, default=32)

    sp = sub.add_parser("correctness", help="scheme and building-block correctness")
    common(sp)
    cosets(sp)
    sp.add_argument("--scheme", choices=["all", *suites.CORRECTNESS], default="all")
    sp.add_argument("--q", type=int, default=32)

    def adversary(sp):
        sp.add_argument("--adversary", choices=[k for k in games.KINDS if k != "Custom"], required=True)
        sp.add_argument("--k", type=int, default=1, help="key queries made by the pirate")
        sp.add_argument("--cheat", action="store_true", help="let the harness duplicate a key")
        sp.add_argument("--on-mismatch", choices=["abstain", "random"], default="abstain")
        sp.add_argument("--expect", type=float, help="win probability the 95%% CI must contain")

    sp = sub.add_parser("moe", help="monogamy-of-entanglement games")
    common(sp)
    cosets(sp)
    sp.add_argument("--variant", choices=games.MOE_VARIANTS, required=True)
    adversary(sp)

    sp = sub.add_parser("antipiracy", help="anti-piracy games")
    common(sp)
    cosets(sp)
    sp.add_argument("--scheme", choices=games.SCHEMES, required=True)
    sp.add_argument("--q", type=int, default=32)
    sp.add_argument("--noninteractive", action="store_true", help="FE freeloaders get a punctured key")
    adversary(sp)

    sp = sub.add_parser("lemmas", help="measurement lemma checks")
    common(sp, trials=200)
    sp.add_argument("--dims", type=int, default=4)
    sp.add_argument("--lemma", action="append", choices=sorted(CHECKS), dest="lemmas")

    sp = sub.add_parser("bench", help="measurement-lab workload with timings in the sidecar")
    common(sp, trials=20)
    sp.add_argument("--epsilon", type=float, default=0.05)
    sp.add_argument("--delta", type=float, default=0.05)
    return p


def config_from_args(ns: argparse.Namespace) -> ExperimentConfig:
    fields = ExperimentConfig.__dataclass_fields__
    kw = {k: v for k, v in vars(ns).items() if k in fields and v is not None}
    if "lemmas" in kw:
        kw["lemmas"] = tuple(kw["lemmas"])
    return ExperimentConfig(**kw)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        status, report, elapsed = run_experiment(cfg)
    except ResourceError as exc:
        print(f"cosetlab: resource cap: {exc}", file=sys.stderr)
        return 3
    except (ParameterError, CosetLabError) as exc:
        print(f"cosetlab: invalid configuration: {exc}", file=sys.stderr)
        return 2
    text = dumps(report)
    if cfg.output:
        with open(cfg.output, "w") as fh:
            fh.write(text)
        with open(cfg.output + ".timing.json", "w") as fh:
            json.dump({"command": cfg.command, "seconds": elapsed, "workers": workers()}, fh, indent=2)
    else:
        sys.stdout.write(text)
    if cfg.csv:
        _write_csv(cfg.csv, report)
    return status


if __name__ == "__main__":
    raise SystemExit(main())
