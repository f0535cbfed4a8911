"""
Command line front end: ``python -m ssalab <command>``.

Commands:

* ``verify``: checks generated or loaded states
* ``sweep``: ``verify`` over several dims triples
* ``minimize``: minimizes F per support pattern, with a random-search oracle
* ``perturb-check``: the first-order perturbation identity over a Δ ladder

Exit codes are 0 when every check passes, 1 on a mathematical violation or
non-convergence, and 2 on usage or input errors. Reports contain no
timestamps, so identical arguments (seed included) give identical bytes.
"""

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import typing
from dataclasses import dataclass, field

import numpy as np

from .conditions import ConditionReport, SpectraTuple, check_state
from .errors import PerturbationError, SamplerError, SsaLabError, UsageError
from .minimizer import (
    FeasibleRegionSpec,
    SupportPattern,
    enumerate_patterns,
    minimize_f,
    oracle_scan,
    perturbation_ladder,
    random_transfer,
    tight_patterns,
)
from .options import BRACKETS, CheckOptions, MinimizerOptions
from .stategen import KINDS, GeneratorSpec, derive_seeds, generate, load_generator_spec
from .tensor_core import DensityMatrix, TripartiteDims, load_density_matrix

logger = logging.getLogger(__name__)

#: environment variable read when ``--seed`` is absent
SEED_ENV = "SSALAB_SEED"

#: gaps and minima below ``-NEGATIVE_TOL`` count as violations in ``minimize``
NEGATIVE_TOL = 1e-6

DEFAULT_LADDER = (1e-4, 5e-5, 2.5e-5)

#: accepted range of the error ratio between consecutive ladder steps
RATIO_RANGE = (3.5, 4.5)

Report = typing.Dict[str, typing.Any]
Rows = typing.List[typing.Dict[str, typing.Any]]


@dataclass
class RunConfig:
    """
    One command invocation; built from the parsed arguments by
    :meth:`from_args`, and the only thing the ``run_*`` functions see
    """

    command: str

    #: a single triple, or a list of triples for ``sweep``
    dims: typing.Any = None

    #: density matrix file for ``verify``
    input: typing.Optional[str] = None

    #: inline JSON or file name of a generator spec
    generator: typing.Optional[str] = None

    kind: str = "ginibre_full"
    rank: typing.Optional[int] = None
    zeros: typing.Optional[int] = None

    states: int = 1
    restarts: int = 32
    oracle: int = 100_000
    patterns: str = "tight"
    max_iterations: int = MinimizerOptions.max_iterations
    configs: int = 100
    deltas: typing.List[float] = field(default_factory=lambda: list(DEFAULT_LADDER))

    #: ``None`` falls back to ``$SSALAB_SEED``, then 0
    seed: typing.Optional[int] = None

    output: typing.Optional[str] = None
    format: str = "json"
    threshold: float = CheckOptions.rank_threshold
    tolerance: float = CheckOptions.majorization_tol
    bracket: str = CheckOptions.bracket

    def __post_init__(self) -> None:
        for name in ("states", "restarts", "oracle", "max_iterations", "configs"):
            value = getattr(self, name)
            if value < 1:
                flag = name.replace("_", "-")
                raise UsageError(f"--{flag} must be >= 1, got {value}")
        for name in ("threshold", "tolerance"):
            value = getattr(self, name)
            if not value > 0:
                raise UsageError(f"--{name} must be > 0, got {value}")
        if not self.deltas or min(self.deltas) <= 0:
            raise UsageError("--deltas must be positive")
        if self.seed is not None and self.seed < 0:
            raise UsageError(f"--seed must be >= 0, got {self.seed}")

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "RunConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        return cls(**{k: v for k, v in vars(args).items() if k in names})


#
# Argument parsing
#


def _dims(text: str) -> TripartiteDims:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"expected L,M,N, got {text!r}")
    try:
        return TripartiteDims(*(int(p) for p in parts))
    except (ValueError, SsaLabError) as e:
        raise argparse.ArgumentTypeError(f"invalid dims {text!r}: {e}")


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _positive_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not value > 0:
        raise argparse.ArgumentTypeError(f"must be > 0, got {text}")
    return value


def _ladder(text: str) -> typing.List[float]:
    return [_positive_float(p) for p in text.split(",")]


def _add_output(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help=f"master seed (default: ${SEED_ENV} or 0)",
    )
    p.add_argument("--output", default=None, help="report file (default: stdout)")
    p.add_argument("--format", choices=["json", "csv"], default="json")


def _add_common(p: argparse.ArgumentParser) -> None:
    _add_output(p)
    p.add_argument(
        "--threshold",
        type=_positive_float,
        default=CheckOptions.rank_threshold,
        help="spectrum entries at or below this count as zeros",
    )
    p.add_argument(
        "--tolerance",
        type=_positive_float,
        default=CheckOptions.majorization_tol,
        help="slack on majorization margins and entropy gaps",
    )
    p.add_argument(
        "--bracket",
        choices=BRACKETS,
        default=CheckOptions.bracket,
        help="reading of [x] in the zero-count bound",
    )


def _add_states(p: argparse.ArgumentParser) -> None:
    p.add_argument("--states", type=_positive_int, default=1)
    p.add_argument("--kind", choices=KINDS, default="ginibre_full")
    p.add_argument("--rank", type=_positive_int, default=None, help="for ginibre_rank")
    p.add_argument("--zeros", type=int, default=None, help="for lemma2_construct")
    p.add_argument(
        "--generator",
        default=None,
        help="generator spec as inline JSON or a JSON file; overrides --kind",
    )


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ssalab", description="Spectral checks of strong subadditivity"
    )
    parser.add_argument("-v", "--verbose", default=False, action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="check generated or loaded states")
    p.add_argument("--dims", type=_dims, default=None, help="L,M,N")
    p.add_argument("--input", default=None, help="density matrix JSON file")
    _add_states(p)
    _add_common(p)

    p = sub.add_parser("sweep", help="verify across several dims triples")
    p.add_argument(
        "--dims", type=_dims, action="append", required=True, help="L,M,N (repeatable)"
    )
    _add_states(p)
    _add_common(p)

    p = sub.add_parser("minimize", help="minimize F per support pattern")
    p.add_argument("--dims", type=_dims, default=TripartiteDims(2, 2, 2))
    p.add_argument("--restarts", type=_positive_int, default=32)
    p.add_argument("--oracle", type=_positive_int, default=100_000)
    p.add_argument(
        "--patterns",
        default="tight",
        help=(
            "'tight' (full support plus patterns meeting the zero-count bound "
            "with equality), 'all', 'full', or Ls,s,r,t patterns separated by ';'"
        ),
    )
    p.add_argument(
        "--max-iterations", type=_positive_int, default=MinimizerOptions.max_iterations
    )
    _add_common(p)

    p = sub.add_parser("perturb-check", help="first-order perturbation identity")
    p.add_argument("--dims", type=_dims, default=TripartiteDims(2, 2, 2))
    p.add_argument("--configs", type=_positive_int, default=100)
    p.add_argument(
        "--deltas",
        type=_ladder,
        default=list(DEFAULT_LADDER),
        help="decreasing Δ values separated by ','",
    )
    _add_output(p)

    return parser


def _seed(cfg: RunConfig) -> int:
    if cfg.seed is not None:
        return cfg.seed
    env = os.environ.get(SEED_ENV)
    if env is None:
        return 0
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}")


def _check_options(cfg: RunConfig) -> CheckOptions:
    return CheckOptions(
        majorization_tol=cfg.tolerance,
        rank_threshold=cfg.threshold,
        bracket=cfg.bracket,
    )


#
# verify / sweep
#


def _as_tripartite(rho: DensityMatrix) -> DensityMatrix:
    if rho.systems == "ABC":
        return rho
    if rho.systems != "AB":
        raise UsageError(f"input state lives on {rho.systems}, expected ABC or AB")
    d = rho.dims
    return DensityMatrix(rho.matrix, TripartiteDims(d.L, d.M, 1))


def _generator(
    cfg: RunConfig, dims: typing.Optional[TripartiteDims]
) -> GeneratorSpec:
    if cfg.generator is not None:
        spec = load_generator_spec(cfg.generator)
        # --dims wins over the dims stored in the generator spec
        return spec if dims is None else dataclasses.replace(spec, dims=dims)
    if dims is None:
        raise UsageError("verify needs --dims, --generator or --input")
    return GeneratorSpec(dims, cfg.kind, rank=cfg.rank, zeros=cfg.zeros)


def _state_record(
    index: int,
    seed: typing.Optional[int],
    rho: DensityMatrix,
    report: ConditionReport,
    tolerance: float,
) -> Report:
    record: Report = {"index": index, "seed": seed, "dims": rho.dims.as_list()}
    record.update(report.to_json())
    record["violations"] = report.violations(tolerance)
    return record


def _verify_states(
    states: typing.Iterable[typing.Tuple[typing.Optional[int], DensityMatrix]],
    opts: CheckOptions,
) -> typing.List[Report]:
    records = []
    for index, (seed, rho) in enumerate(states):
        report = check_state(rho, options=opts)
        records.append(_state_record(index, seed, rho, report, opts.majorization_tol))
        if (index + 1) % 100 == 0:
            logger.info("checked %d states", index + 1)
    return records


def _summary(records: typing.List[Report]) -> Report:
    lemma2 = [r["lemma2"] for r in records]
    return {
        "states": len(records),
        "min_lemma1_margin": min(r["lemma1"]["margin"] for r in records),
        "min_ssa_gap": min(r["ssa_gap"] for r in records),
        "min_subadd_gap": min(r["subadd_gap"] for r in records),
        "lemma2_applicable": sum(1 for x in lemma2 if x["applicable"]),
        "lemma2_failures": sum(1 for x in lemma2 if not x["holds"]),
        "violations": sum(1 for r in records if r["violations"]),
    }


def _generated(
    spec: GeneratorSpec, base_seed: int, count: int
) -> typing.Iterator[typing.Tuple[typing.Optional[int], DensityMatrix]]:
    for s in derive_seeds(base_seed, count):
        yield s, generate(spec.with_seed(s))


def run_verify(cfg: RunConfig) -> typing.Tuple[int, Report, Rows]:
    opts = _check_options(cfg)
    logger.info("zero-count bound uses the %s reading of [x]", opts.bracket)

    report: Report = {"command": "verify", "options": dataclasses.asdict(opts)}
    if cfg.input is not None:
        rho = _as_tripartite(load_density_matrix(cfg.input))
        if cfg.dims is not None and cfg.dims != rho.dims:
            raise UsageError(
                f"{cfg.input} has dims {rho.dims.as_list()}, "
                f"--dims says {cfg.dims.as_list()}"
            )
        report["input"] = cfg.input
        records = _verify_states([(None, rho)], opts)
    else:
        spec = _generator(cfg, cfg.dims)
        explicit = cfg.generator is not None and cfg.seed is None
        seed = spec.seed if explicit else _seed(cfg)
        report["generator"] = spec.to_json()
        report["seed"] = seed
        records = _verify_states(_generated(spec, seed, cfg.states), opts)

    report["records"] = records
    report["summary"] = _summary(records)
    code = 1 if report["summary"]["violations"] else 0
    return code, report, _state_rows(records)


def run_sweep(cfg: RunConfig) -> typing.Tuple[int, Report, Rows]:
    opts = _check_options(cfg)
    seed = _seed(cfg)
    logger.info("zero-count bound uses the %s reading of [x]", opts.bracket)

    runs = []
    all_records: typing.List[Report] = []
    for dims, dims_seed in zip(cfg.dims, derive_seeds(seed, len(cfg.dims))):
        spec = _generator(cfg, dims)
        records = _verify_states(_generated(spec, dims_seed, cfg.states), opts)
        all_records.extend(records)
        runs.append(
            {
                "dims": dims.as_list(),
                "generator": spec.to_json(),
                "seed": dims_seed,
                "records": records,
                "summary": _summary(records),
            }
        )

    report: Report = {
        "command": "sweep",
        "options": dataclasses.asdict(opts),
        "seed": seed,
        "runs": runs,
        "summary": _summary(all_records),
    }
    code = 1 if report["summary"]["violations"] else 0
    return code, report, _state_rows(all_records)


def _state_rows(records: typing.List[Report]) -> Rows:
    rows = []
    for r in records:
        L, M, N = r["dims"]
        l1 = r["lemma1"]
        l2 = r["lemma2"]
        rows.append(
            {
                "index": r["index"],
                "seed": r["seed"],
                "L": L,
                "M": M,
                "N": N,
                "ab_vs_abc": l1["ab_vs_abc"]["margin"],
                "bc_vs_abc": l1["bc_vs_abc"]["margin"],
                "b_vs_bc": l1["b_vs_bc"]["margin"],
                "b_vs_ab": l1["b_vs_ab"]["margin"],
                "lemma1_holds": l1["holds"],
                "lemma2_applicable": l2["applicable"],
                "lemma2_holds": l2["holds"],
                "Ls": l2["Ls"],
                "s": l2["s"],
                "r": l2["r"],
                "t": l2["t"],
                "ssa_gap": r["ssa_gap"],
                "subadd_gap": r["subadd_gap"],
                "violations": ";".join(r["violations"]),
            }
        )
    return rows


#
# minimize
#


def _patterns(
    text: str, dims: TripartiteDims, bracket: str
) -> typing.List[SupportPattern]:
    if text == "tight":
        return tight_patterns(dims, bracket)
    if text == "all":
        return enumerate_patterns(dims, bracket)
    return [SupportPattern.parse(p) for p in text.split(";") if p.strip()]


def run_minimize(cfg: RunConfig) -> typing.Tuple[int, Report, Rows]:
    seed = _seed(cfg)
    check_opts = _check_options(cfg)
    opts = MinimizerOptions(max_iterations=cfg.max_iterations)
    logger.info("zero-count bound uses the %s reading of [x]", cfg.bracket)

    specs = [
        FeasibleRegionSpec(cfg.dims, p, cfg.tolerance, cfg.bracket, cfg.threshold)
        for p in _patterns(cfg.patterns, cfg.dims, cfg.bracket)
    ]
    if not specs:
        raise UsageError("no support pattern selected")

    code = 0
    results = []
    rows = []
    for spec, pattern_seed in zip(specs, derive_seeds(seed, len(specs))):
        oracle_seed, restart_seed = derive_seeds(pattern_seed, 2)
        entry: Report = {"pattern": spec.pattern.to_json(), "seed": pattern_seed}
        try:
            oracle = oracle_scan(spec, cfg.oracle, oracle_seed, options=opts)
            result = minimize_f(
                spec, cfg.restarts, restart_seed, starts=[oracle.argmin], options=opts
            )
        except SamplerError as e:
            logger.warning("pattern (%s): %s", spec.pattern, e)
            entry["error"] = str(e)
            results.append(entry)
            rows.append({"pattern": str(spec.pattern), "error": str(e)})
            continue

        entry["oracle"] = {
            "minimum": oracle.minimum,
            "evaluated": oracle.evaluated,
            "argmin": oracle.argmin.to_json(),
        }
        entry["minimization"] = result.to_json()
        results.append(entry)

        minima = [oracle.minimum]
        if result.objective is not None:
            minima.append(result.objective)
        if min(minima) < -NEGATIVE_TOL or not result.converged:
            code = 1

        rows.append(
            {
                "pattern": str(spec.pattern),
                "oracle_minimum": oracle.minimum,
                "objective": result.objective,
                "restarts": result.restarts,
                "converged_restarts": result.converged_restarts,
                "feasibility_residual": result.feasibility_residual,
                "uniformity_deviation": result.uniformity_deviation,
                "uniform": result.uniform,
                "error": "",
            }
        )

    report: Report = {
        "command": "minimize",
        "dims": cfg.dims.as_list(),
        "seed": seed,
        "restarts": cfg.restarts,
        "oracle_samples": cfg.oracle,
        "options": dataclasses.asdict(check_opts),
        "minimizer_options": dataclasses.asdict(opts),
        "patterns": results,
    }
    return code, report, rows


#
# perturb-check
#


def run_perturb_check(cfg: RunConfig) -> typing.Tuple[int, Report, Rows]:
    seed = _seed(cfg)
    deltas = list(cfg.deltas)
    rng = np.random.default_rng(seed)
    low, high = RATIO_RANGE

    report: Report = {
        "command": "perturb-check",
        "dims": cfg.dims.as_list(),
        "seed": seed,
        "deltas": deltas,
        "ratio_range": list(RATIO_RANGE),
    }

    configs = []
    rows: Rows = []
    ratios: typing.List[float] = []
    zero_ok = True
    symmetric_ok = True
    try:
        for index in range(cfg.configs):
            t, transfer = random_transfer(rng, cfg.dims, max(deltas))
            (zero,) = perturbation_ladder(t, transfer, [0.0])
            zero_ok = zero_ok and zero.predicted == 0.0 and zero.direct == 0.0

            (symmetric,) = perturbation_ladder(
                SpectraTuple.uniform(cfg.dims), transfer, [max(deltas)]
            )
            vanishes = abs(symmetric.predicted) <= 1e-12 * max(deltas)
            symmetric_ok = symmetric_ok and vanishes

            ladder = perturbation_ladder(t, transfer, deltas)
            ratios.extend(row.ratio for row in ladder if row.ratio is not None)
            configs.append(
                {
                    "index": index,
                    "tuple": t.to_json(),
                    "transfer": transfer.to_json(),
                    "rows": [dataclasses.asdict(row) for row in [zero] + ladder],
                }
            )
            for row in [zero] + ladder:
                rows.append({"config": index, **dataclasses.asdict(row)})
    except PerturbationError as e:
        logger.error("%s", e)
        report["error"] = str(e)
        report["configs"] = configs
        return 1, report, rows

    ok = zero_ok and symmetric_ok and all(low <= r <= high for r in ratios)
    report["configs"] = configs
    report["summary"] = {
        "configs": len(configs),
        "min_ratio": min(ratios) if ratios else None,
        "max_ratio": max(ratios) if ratios else None,
        "zero_rows_exact": zero_ok,
        "symmetric_prediction_zero": symmetric_ok,
        "passed": ok,
    }
    return (0 if ok else 1), report, rows


#
# Output
#

_COMMANDS = {
    "verify": run_verify,
    "sweep": run_sweep,
    "minimize": run_minimize,
    "perturb-check": run_perturb_check,
}


def _render(report: Report, rows: Rows, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, indent=2) + "\n"

    out = io.StringIO()
    fieldnames: typing.List[str] = []
    for row in rows:
        for key in row:
            if key not in fieldnames:
                fieldnames.append(key)
    writer = csv.DictWriter(out, fieldnames=fieldnames, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return out.getvalue()


def main(argv: typing.Optional[typing.Sequence[str]] = None) -> int:
    parser = make_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )

    try:
        cfg = RunConfig.from_args(args)
        code, report, rows = _COMMANDS[cfg.command](cfg)
    except (SsaLabError, OSError) as e:
        print(f"ssalab {args.command}: error: {e}", file=sys.stderr)
        return 2

    text = _render(report, rows, cfg.format)
    if cfg.output is None:
        sys.stdout.write(text)
    else:
        try:
            with open(cfg.output, "w", encoding="utf-8", newline="") as fp:
                fp.write(text)
        except OSError as e:
            print(f"ssalab {cfg.command}: error: {e}", file=sys.stderr)
            return 2
    return code
