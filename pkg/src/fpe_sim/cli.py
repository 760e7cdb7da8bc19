"""fpe-sim command line: run scenarios, list them, run the acceptance suite.

Exit codes: 0 success, 1 tolerance failure, 2 config error, 3 engine
failure.  Every non-zero exit writes one JSON line to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .errors import ConfigError, FpeError
from .scenarios import (
    Scenario,
    builtin_scenarios,
    discover_user_scenarios,
    failure_line,
    load_scenario_file,
    run_scenario,
)

EXIT_OK, EXIT_TOLERANCE, EXIT_CONFIG, EXIT_ENGINE = 0, 1, 2, 3


def _reason(status: str, **kw) -> str:
    return json.dumps({"status": status, **kw}, sort_keys=True)


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fpe-sim", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one or more scenarios (built-in name, user name or file path)")
    run.add_argument("scenarios", nargs="+", metavar="scenario|path")
    run.add_argument("--out-dir", help="output directory (default: the scenario's out_dir)")
    run.add_argument("--seed", type=int, help="override mc.seed")
    run.add_argument("--cells", type=int, help="override fd.n_cells")
    run.add_argument("--paths", type=int, help="override mc.n_paths")
    run.add_argument("--jobs", type=int, default=1, help="scenarios to run concurrently")
    sub.add_parser("list", help="list built-in and user scenarios")
    ver = sub.add_parser("verify", help="run the acceptance suite")
    ver.add_argument("--only", help="comma-separated criterion numbers")
    return ap


def _resolve(name: str) -> Scenario:
    path = Path(name)
    if path.is_file():
        return load_scenario_file(path)
    builtins = builtin_scenarios()
    if name in builtins:
        return builtins[name]
    users, _ = discover_user_scenarios()
    if name in users:
        return users[name]
    raise ConfigError(f"no scenario or file named {name!r}")


def _cmd_run(args) -> int:
    if args.jobs < 1:
        print(_reason("config", reason="--jobs must be at least 1"), file=sys.stderr)
        return EXIT_CONFIG
    try:
        scenarios = []
        for name in args.scenarios:
            sc = _resolve(name)
            out = args.out_dir
            if out is not None and len(args.scenarios) > 1:
                out = str(Path(out) / sc.name)
            scenarios.append(sc.with_overrides(out_dir=out, seed=args.seed, cells=args.cells,
                                               paths=args.paths))
    except ConfigError as exc:
        print(_reason("config", reason=str(exc)), file=sys.stderr)
        return EXIT_CONFIG

    def one(sc):
        try:
            return sc, run_scenario(sc), None
        except (FpeError, ArithmeticError, OSError) as exc:
            return sc, None, exc

    with ThreadPoolExecutor(max_workers=args.jobs) as ex:
        outcomes = list(ex.map(one, scenarios))
    code = EXIT_OK
    for sc, res, exc in outcomes:
        if exc is not None:
            print(_reason("engine", scenario=sc.name, error=type(exc).__name__, reason=str(exc)),
                  file=sys.stderr)
            code = EXIT_ENGINE
            continue
        print(f"{sc.name}: wrote {len(res.files)} files to {sc.out_dir}")
        for f in res.failures:
            print(failure_line(sc.name, f), file=sys.stderr)
        if res.failures and code == EXIT_OK:
            code = EXIT_TOLERANCE
    return code


def _cmd_list(args) -> int:
    for name, sc in builtin_scenarios().items():
        print(f"{name}\t{sc.description}")
    users, bad = discover_user_scenarios()
    for name, sc in users.items():
        print(f"{name}\t{sc.description or '(user config)'}")
    for path, reason in bad:
        print(f"warning: skipping malformed config {path}: {reason}", file=sys.stderr)
    return EXIT_OK


def _cmd_verify(args) -> int:
    from .acceptance import CRITERIA, run_all

    numbers = None
    if args.only:
        try:
            numbers = [int(v) for v in args.only.split(",")]
        except ValueError:
            numbers = [-1]
        if any(n not in CRITERIA for n in numbers):
            print(_reason("config", reason=f"--only takes numbers from 1 to {len(CRITERIA)}"),
                  file=sys.stderr)
            return EXIT_CONFIG
    results = run_all(numbers, report=lambda line: print(line, flush=True))
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed")
    if failed:
        print(_reason("tolerance", failed_criteria=failed), file=sys.stderr)
        return EXIT_TOLERANCE
    return EXIT_OK


def main(argv=None) -> int:
    ap = _build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        if exc.code not in (0, None):
            print(_reason("config", reason="invalid command line"), file=sys.stderr)
            return EXIT_CONFIG
        return EXIT_OK
    return {"run": _cmd_run, "list": _cmd_list, "verify": _cmd_verify}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
