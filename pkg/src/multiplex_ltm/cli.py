"""Command-line entry point: ``mltm <subcommand> ...``.

Every subcommand writes a JSON document holding the fully resolved run
configuration and the result to ``--out`` (``--out -`` for stdout) and a short
human-readable summary to stdout. Failures print a JSON error document to
stderr and exit with

    2  usage error        3  invalid input
    4  capacity / gating  5  internal error
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import secrets
import sys
from importlib.resources import files
from pathlib import Path
from typing import Any, Sequence

from .analytic import FAMILIES, FamilySpec, generate, permutation_probability, repeated_path_centrality
from .bayesnet import influence_spread_bn
from .errors import CapacityError, CyclicProjectionError, NetworkValidationError, UnsupportedProtocolError
from .experiments import PE_MODES, c_grid, optimal_protocol_sweep, pe_sweep
from .lbp import DEFAULTS as LBP_DEFAULTS
from .live_edge import CAP_ENV, enumeration_cap, exact_probabilities
from .network import (
    is_dag,
    is_polytree,
    load_network,
    load_seeds,
    serialize_network,
)
from .protocols import protocol_sequence
from .simulation import estimate_spread

SCHEMAS = f"""\
input files (JSON):
  network   {{"n": 3, "m": 2, "names": ["a", "b", "c"],
             "layers": [{{"edges": [{{"from": 2, "to": 1, "weight": 1.0}}, ...],
                         "directed": true}}, ...]}}
            An edge i -> j means agent i senses agent j. "weight" may be left out
            for all out-edges of an agent in a layer (each then gets 1/out-degree);
            given weights must sum to 1 per agent and layer. "from"/"to" accept
            ids 1..n or names. "names" and "directed" (default true) are optional.
  protocols array of n entries, each "OR", "AND" or a number delta in [1/m, 1];
            a single "OR"/"AND" applies to every agent
  seeds     array of agent ids or names
  --protocols and --seeds take a file path or the JSON text itself.

exit codes: 0 ok, 2 usage, 3 invalid input, 4 capacity/gating, 5 internal
environment: {CAP_ENV} overrides the exact-enumeration cap (default {enumeration_cap()})
"""


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse exits by default
        raise UsageError(f"{self.prog}: {message}")


def _read_text(ref: str, what: str) -> str:
    p = Path(ref)
    if p.exists():
        try:
            return p.read_text()
        except OSError as exc:
            raise NetworkValidationError(f"cannot read {what} file {ref}: {exc}") from None
    return ref


def _json_or_word(text: str, what: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        word = text.strip()
        if word.upper() in ("OR", "AND"):
            return word
        raise NetworkValidationError(f"{what}: not a readable file or valid JSON: {text[:60]!r}") from None


def _network(args):
    if getattr(args, "network", None) is None:
        raise UsageError("--network is required")
    p = Path(args.network)
    if not p.exists():
        raise NetworkValidationError(f"network file {args.network} not found")
    try:
        text = p.read_text()
    except OSError as exc:
        raise NetworkValidationError(f"cannot read network file {args.network}: {exc}") from None
    return load_network(text)


def _protocols(args, net):
    doc = _json_or_word(_read_text(args.protocols, "protocols"), "protocols")
    if not isinstance(doc, (list, str)):
        raise NetworkValidationError("schema violation: protocol document must be an array or OR/AND")
    return protocol_sequence(doc, net.n, net.m)


def _seeds(args, net):
    return load_seeds(_json_or_word(_read_text(args.seeds, "seeds"), "seeds"), net)


def _resolve_seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbelow(2**32)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _config(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != "func"}


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def _emit(args, text: str) -> None:
    if args.out is None:
        return
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)


def _probability_summary(res) -> str:
    rows = [f"  agent {i + 1:>3}: {p:.6f}" for i, p in enumerate(res.per_agent)]
    return "\n".join(rows + [f"  spread: {res.spread:.6f}"])


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args) -> None:
    net = _network(args)
    prot, seeds = _protocols(args, net), _seeds(args, net)
    seed = _resolve_seed(args)
    if args.trials < 1:
        raise NetworkValidationError("--trials must be positive")
    threads = args.threads or os.cpu_count() or 1
    res = estimate_spread(net, prot, seeds, args.trials, seed, threads=threads)
    doc = {"config": _config(args), "result": res.to_json() | {"standard_errors": list(map(float, res.standard_errors()))}}
    _emit(args, _dump(doc))
    print(f"Monte Carlo, {args.trials} trials, seed {seed}\n" + _probability_summary(res))


def cmd_exact(args) -> None:
    net = _network(args)
    prot, seeds = _protocols(args, net), _seeds(args, net)
    res = exact_probabilities(net, prot, seeds, cap=args.cap)
    _emit(args, _dump({"config": _config(args), "result": res.to_json()}))
    print(f"exact live-edge enumeration ({res.enumerated} selections)\n" + _probability_summary(res))


def cmd_bn(args) -> None:
    net = _network(args)
    prot, seeds = _protocols(args, net), _seeds(args, net)
    params = {}
    if args.method == "lbp":
        params = {"max_iters": args.max_iters, "tolerance": args.tol, "damping": args.damping}
    res = influence_spread_bn(net, prot, seeds, method=args.method, **params)
    _emit(args, _dump({"config": _config(args), "result": res.to_json()}))
    status = "" if res.converged else " (NOT converged)"
    print(f"Bayesian network, {res.method}{status}\n" + _probability_summary(res))


def cmd_analytic(args) -> None:
    fam = args.family
    if fam == "repeated-path":
        value = repeated_path_centrality(args.N, args.j, args.variant, args.form)
        what = f"cascade centrality of agent {args.j}"
    elif fam in ("permutation", "permutation-duplex"):
        if args.i is None:
            raise UsageError("--i is required for the permutation family")
        variant = "cycle" if args.variant == "proj" else args.variant
        value = permutation_probability(args.N, args.i, args.j, variant, args.form)
        what = f"probability agent {args.i} activates from seed {args.j}"
    else:
        raise NetworkValidationError(f"no closed form for family {fam!r}; use repeated-path or permutation")
    _emit(args, _dump({"config": _config(args), "result": {"value": value}}))
    print(f"{fam}, N={args.N}, {args.variant} ({args.form}): {what} = {value:.12g}")


def cmd_generate(args) -> None:
    fam = "permutation-duplex" if args.family == "permutation" else args.family
    if fam == "random-duplex-dag":
        _resolve_seed(args)
    spec = FamilySpec(fam, args.N, args.p_e, args.seed)
    net = generate(spec)
    doc = serialize_network(net) | {"config": _config(args)}
    _emit(args, _dump(doc))
    print(f"{fam}: n={net.n}, m={net.m}, edges per layer {[len(g.edges) for g in net.layers]}")


def _csv_text(args, rows: list[dict], columns: list[str]) -> str:
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(_config(args), sort_keys=True) + "\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r[k] for k in columns})
    return buf.getvalue()


def _bundled_signal_network():
    return load_network(files("multiplex_ltm").joinpath("data", "signal_duplex.json").read_text())


def cmd_sweep_c(args) -> None:
    net = _network(args) if args.network else _bundled_signal_network()
    if args.c_step <= 0 or args.c_max < 0:
        raise NetworkValidationError("--c-step must be positive and --c-max nonnegative")
    res = optimal_protocol_sweep(net, c_grid(args.c_max, args.c_step), rewiring=args.rewiring)
    rows = res.to_rows()
    _emit(args, _csv_text(args, rows, ["c", "fraction_and", "q_opt", "optimal_sets"]))
    prev = None
    print("c       fraction_and  optimal AND-sets")
    for r in rows:
        if r["optimal_sets"] != prev:
            print(f"{r['c']:<7g} {r['fraction_and']:<13.4f} {r['optimal_sets'] or '{}'}")
            prev = r["optimal_sets"]


def _parse_grid(text: str) -> list[float]:
    parts = text.split(":")
    try:
        if len(parts) == 3:
            lo, hi, step = map(float, parts)
            if step <= 0 or hi < lo:
                raise ValueError
            k = int(round((hi - lo) / step))
            return [round(lo + i * step, 12) for i in range(k + 1)]
        return [float(x) for x in text.split(",")]
    except ValueError:
        raise NetworkValidationError(f"bad --grid {text!r}; use lo:hi:step or a comma list") from None


def cmd_sweep_pe(args) -> None:
    seed = _resolve_seed(args)
    grid = _parse_grid(args.grid)
    if any(not 0.0 <= p <= 1.0 for p in grid):
        raise NetworkValidationError("p_e values must lie in [0, 1]")
    modes = [m.strip().lower() for m in args.modes.split(",") if m.strip()]
    bad = [m for m in modes if m not in PE_MODES]
    if bad:
        raise NetworkValidationError(f"unknown modes {bad}; expected a subset of {','.join(PE_MODES)}")
    if args.n < 1 or args.replicates < 1:
        raise NetworkValidationError("--n and --replicates must be positive")
    pts = pe_sweep(args.n, grid, args.replicates, modes, seed, backend=args.backend)
    rows = [
        {"p_e": p.p_e, "mode": p.mode, "mean_centrality": p.mean_centrality, "stderr": p.stderr, "backend": p.backend}
        for p in pts
    ]
    _emit(args, _csv_text(args, rows, ["p_e", "mode", "mean_centrality", "stderr", "backend"]))
    print(f"root cascade centrality, n={args.n}, {args.replicates} replicates, seed {seed}")
    for r in rows:
        print(f"  p_e={r['p_e']:<5g} {r['mode']:<6} {r['mean_centrality']:.4f} +- {r['stderr']:.4f}")


def cmd_validate(args) -> None:
    net = _network(args)
    diagnostics: list[str] = []
    if args.protocols:
        _protocols(args, net)
    if args.seeds:
        _seeds(args, net)
    info = {
        "n": net.n,
        "m": net.m,
        "edges_per_layer": [len(g.edges) for g in net.layers],
        "acyclic_projection": is_dag(net),
        "polytree_projection": is_polytree(net),
        "agents_with_empty_layer": [i for i in net.agents if net.has_empty_layer(i)],
    }
    _emit(args, _dump({"config": _config(args), "diagnostics": diagnostics, "info": info}))
    print(f"valid: n={net.n}, m={net.m}, acyclic projection: {info['acyclic_projection']}")


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.RawDescriptionHelpFormatter
    p = _Parser(prog="mltm", description="Heterogeneous multiplex linear threshold model.", epilog=SCHEMAS, formatter_class=fmt)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_, epilog=SCHEMAS, formatter_class=fmt)
        sp.set_defaults(func=func)
        sp.add_argument("--out", help="output document path ('-' for stdout)")
        return sp

    def instance(sp, need_all=True):
        sp.add_argument("--network", required=True, help="network file")
        sp.add_argument("--protocols", required=need_all, help="protocol file or JSON text")
        sp.add_argument("--seeds", required=need_all, help="seed file or JSON text")

    sp = add("simulate", cmd_simulate, "Monte Carlo estimate of activation probabilities")
    instance(sp)
    sp.add_argument("--trials", type=int, default=100_000)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int, help="worker threads (default: all cores)")

    sp = add("exact", cmd_exact, "exact probabilities by live-edge enumeration")
    instance(sp)
    sp.add_argument("--cap", type=int, help=f"maximum selections (default {CAP_ENV} or {enumeration_cap()})")

    sp = add("bn", cmd_bn, "Bayesian-network backend (acyclic projections only)")
    instance(sp)
    sp.add_argument("--method", choices=["exact", "lbp"], default="exact")
    sp.add_argument("--max-iters", type=int, default=LBP_DEFAULTS["max_iters"])
    sp.add_argument("--tol", type=float, default=LBP_DEFAULTS["tolerance"])
    sp.add_argument("--damping", type=float, default=LBP_DEFAULTS["damping"])

    sp = add("analytic", cmd_analytic, "closed-form values for the path families")
    sp.add_argument("--family", required=True, choices=["repeated-path", "permutation", "permutation-duplex"])
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--j", type=int, required=True, help="seed agent")
    sp.add_argument("--i", type=int, help="target agent (permutation family)")
    sp.add_argument("--variant", choices=["or", "and", "proj"], required=True)
    sp.add_argument("--form", choices=["printed", "corrected"], default="printed")

    sp = add("generate", cmd_generate, "write a network of one of the built-in families")
    sp.add_argument("--family", required=True, choices=list(FAMILIES) + ["permutation"])
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--p-e", type=float, dest="p_e")
    sp.add_argument("--seed", type=int)

    sp = add("sweep-c", cmd_sweep_c, "optimal protocol sequences of the signal-detection utility over c")
    sp.add_argument("--network", help="base network (default: bundled six-agent duplex)")
    sp.add_argument("--c-max", type=float, default=3.0)
    sp.add_argument("--c-step", type=float, default=0.05)
    sp.add_argument("--rewiring", choices=["remove", "renormalize"], default="remove")

    sp = add("sweep-pe", cmd_sweep_pe, "root cascade centrality of random duplex DAGs over p_e")
    sp.add_argument("--n", type=int, default=20)
    sp.add_argument("--grid", default="0:1:0.05", help="lo:hi:step or comma list")
    sp.add_argument("--replicates", type=int, default=400)
    sp.add_argument("--modes", default="or,and,mixed")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--backend", choices=["auto", "bn", "lbp", "lem"], default="auto")

    sp = add("validate", cmd_validate, "check a network (and optionally protocol and seed files)")
    instance(sp, need_all=False)
    return p


_EXIT = (
    (UsageError, 2),
    (CapacityError, 4),
    (CyclicProjectionError, 4),
    (UnsupportedProtocolError, 3),
    (NetworkValidationError, 3),
    (ValueError, 3),
)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a subcommand is required; see mltm --help")
        args.func(args)
        return 0
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error document
        code = next((c for t, c in _EXIT if isinstance(exc, t)), 5)
        doc = {"error": {"type": type(exc).__name__, "message": str(exc), "exit_code": code}}
        sys.stderr.write(_dump(doc))
        return code


if __name__ == "__main__":
    sys.exit(main())
