"""Command-line entry point: ``episis {generate,simulate,fig3,fig4,couple}``.

Every command reads an optional JSON config (``--config``), applies flag
overrides, and echoes the resolved config into its outputs: CSV files start
with one ``#`` line carrying the config's SHA-256 and the config itself; JSON
reports carry ``config`` and ``config_sha256`` keys.

Exit codes: 0 success, 1 validation error, 2 I/O error, 3 verification
failure (coupling marginals off by more than 1e-10).
"""

from __future__ import annotations

import argparse
import copy
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import coupling as cpl
from . import dynamics as dyn
from . import experiments as exp
from . import metrics as met
from .errors import GraphFormatError, MetricContractError, ParameterError, ResourceError
from .graph import (
    Graph,
    gen_erdos_renyi,
    gen_geometric_torus,
    gen_preferential_attachment,
    largest_connected_component,
    read_edge_list,
    rewire_social,
    spectral_radius,
    write_edge_list,
)
from .rng import child_rng, child_seed

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_VERIFY = 3
VERIFY_TOL = 1e-10

DEFAULTS = {
    "seed": 0,
    "out": "out",
    "graph": {"family": "er", "n": 1000, "p": 0.01, "r": 0.0564, "m": 5, "seed": None, "file": None,
              "lcc": True},
    "social": {"rewire_p": 0.0, "seed": None, "file": None},
    "params": {"beta": 0.2, "delta": 0.2, "alpha": 0.5},
    "simulate": {"chain": "benchmark", "horizon": 200, "replicas": 1, "init": "one-random"},
    "fig3": {"ratios": None, "points": 25, "stretch": 1.25, "beta": None, "horizon": 200, "replicas": 1},
    "fig4": {"cells": [list(c) for c in exp.DEFAULT_FIG4_CELLS], "horizon": 100, "replicas": 100},
    "couple": {"horizon": 200, "replicas": 1000, "init": "one-random",
               "metrics": ["absorption_time", "social_cost:50", "epidemic_spread:50"],
               "probes": ["absorption_time>10", "social_cost:50>100"], "runs_csv": True},
}

FAMILIES = ("er", "geometric", "pa")


class VerificationFailure(Exception):
    pass


# --- config -------------------------------------------------------------------------

def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def config_hash(config: dict) -> str:
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def header_line(config: dict) -> str:
    return f"# episis config_sha256={config_hash(config)} config={json.dumps(config, sort_keys=True, separators=(',', ':'))}\n"


def _set(cfg, dotted, value):
    if value is None:
        return
    node = cfg
    *parents, leaf = dotted.split(".")
    for p in parents:
        node = node.setdefault(p, {})
    node[leaf] = value


OVERRIDES = {
    "seed": "seed", "out": "out",
    "family": "graph.family", "n": "graph.n", "p": "graph.p", "r": "graph.r", "m": "graph.m",
    "graph_seed": "graph.seed", "graph": "graph.file", "lcc": "graph.lcc",
    "rewire_p": "social.rewire_p", "social_seed": "social.seed", "social_graph": "social.file",
    "beta": "params.beta", "delta": "params.delta", "alpha": "params.alpha",
}


def resolve_config(args) -> dict:
    cfg = copy.deepcopy(DEFAULTS)
    if args.config:
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ParameterError(f"config {args.config}: invalid JSON ({e})") from None
        if not isinstance(loaded, dict):
            raise ParameterError("config must be a JSON object")
        cfg = _merge(cfg, loaded)
    for attr, dotted in OVERRIDES.items():
        _set(cfg, dotted, getattr(args, attr, None))
    cmd = args.command
    for attr in ("chain", "horizon", "replicas", "init", "points", "stretch", "fig3_beta", "metrics", "probes"):
        val = getattr(args, attr, None)
        if val is not None:
            key = "beta" if attr == "fig3_beta" else attr
            _set(cfg, f"{cmd}.{key}", val)
    if getattr(args, "ratios", None) is not None:
        _set(cfg, f"{cmd}.ratios", args.ratios)
    if getattr(args, "cells", None) is not None:
        _set(cfg, "fig4.cells", [list(c) for c in args.cells])
    # keep only the sections this command reads so the hash reflects real inputs
    keep = {"seed", "out", "graph", "social", "params", cmd}
    return {k: v for k, v in cfg.items() if k in keep}


def _unit_open(name, v):
    v = float(v)
    if not 0.0 < v < 1.0:
        raise ParameterError(f"{name} must lie in (0, 1), got {v}")
    return v


def _unit_closed(name, v):
    v = float(v)
    if not 0.0 <= v <= 1.0:
        raise ParameterError(f"{name} must lie in [0, 1], got {v}")
    return v


def _count(name, v, minimum=0):
    if isinstance(v, bool) or int(v) != v or v < minimum:
        raise ParameterError(f"{name} must be an integer >= {minimum}, got {v!r}")
    return int(v)


def params_from(cfg) -> dyn.EpidemicParams:
    p = cfg["params"]
    return dyn.EpidemicParams(_unit_open("beta", p["beta"]), _unit_open("delta", p["delta"]),
                              _unit_closed("alpha", p["alpha"]))


def validate_graph_spec(spec):
    if spec.get("file"):
        return
    fam = spec["family"]
    if fam not in FAMILIES:
        raise ParameterError(f"graph family must be one of {FAMILIES}, got {fam!r}")
    _count("n", spec["n"], 1)
    if fam == "er":
        _unit_open("p", spec["p"])
    elif fam == "geometric":
        _unit_open("r", spec["r"])
    else:
        m = _count("m", spec["m"], 1)
        if m > spec["n"]:
            raise ParameterError(f"need n >= m for preferential attachment, got n={spec['n']}, m={m}")


def build_contact(cfg, reduce_lcc: bool | None = None) -> Graph:
    spec = cfg["graph"]
    validate_graph_spec(spec)
    if spec.get("file"):
        g = read_edge_list(spec["file"])
    else:
        seed = spec["seed"] if spec["seed"] is not None else child_seed(cfg["seed"], exp.STREAM_GRAPH)
        fam = spec["family"]
        if fam == "er":
            g = gen_erdos_renyi(spec["n"], spec["p"], seed)
        elif fam == "geometric":
            g = gen_geometric_torus(spec["n"], spec["r"], seed)
        else:
            g = gen_preferential_attachment(spec["n"], spec["m"], seed)
    lcc = spec.get("lcc", True) if reduce_lcc is None else reduce_lcc
    return largest_connected_component(g) if lcc else g


def build_social(cfg, contact: Graph) -> Graph:
    spec = cfg["social"]
    if spec.get("file"):
        social = read_edge_list(spec["file"])
        if social.n != contact.n:
            raise ParameterError(f"social graph has {social.n} nodes, contact graph has {contact.n}")
        return social
    p = _unit_closed("rewire_p", spec["rewire_p"])
    if p == 0.0 or contact.num_edges == 0:
        return contact
    seed = spec["seed"] if spec["seed"] is not None else child_seed(cfg["seed"], exp.STREAM_SOCIAL)
    return rewire_social(contact, p, seed)


def parse_init(spec, n):
    if isinstance(spec, list):
        return dyn.as_state(spec, n)
    if isinstance(spec, str) and spec.startswith("hex:"):
        return dyn.hex_to_state(spec[4:], n)
    if spec in ("one-random", "all", "none"):
        return spec
    raise ParameterError(f"init must be 'one-random', 'all', 'none', 'hex:<digits>' or a bit list, got {spec!r}")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: Path, config: dict, columns, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(header_line(config))
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            values = [row[c] for c in columns] if isinstance(row, dict) else row
            w.writerow([_fmt(v) for v in values])


def write_json(path: Path, config: dict, payload: dict) -> None:
    doc = {"config": config, "config_sha256": config_hash(config), **payload}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o)}")


def _outdir(cfg) -> Path:
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


# --- commands -------------------------------------------------------------------------

def cmd_generate(cfg) -> int:
    contact = build_contact(cfg)
    out = _outdir(cfg)
    write_edge_list(contact, out / "contact.edges")
    summary = exp.graph_summary(contact)
    print(f"n={summary['n']} edges={summary['edges']} mean_degree={summary['mean_degree']!r} "
          f"lambda_max={summary['lambda_max']!r}")
    if cfg["social"].get("rewire_p", 0.0) or cfg["social"].get("file"):
        social = build_social(cfg, contact)
        write_edge_list(social, out / "social.edges")
        print(f"social edges={social.num_edges}")
    return EXIT_OK


def cmd_simulate(cfg) -> int:
    params = params_from(cfg)
    sim = cfg["simulate"]
    chain = sim["chain"]
    if chain not in dyn.KINDS:
        raise ParameterError(f"chain must be one of {dyn.KINDS}, got {chain!r}")
    horizon = _count("horizon", sim["horizon"], 0)
    replicas = _count("replicas", sim["replicas"], 1)
    contact = build_contact(cfg)
    graphs = dyn.Graphs(contact, build_social(cfg, contact))
    init = parse_init(sim["init"], contact.n)
    out = _outdir(cfg)
    rng = child_rng(cfg["seed"], exp.STREAM_SIM)
    S = cpl.initial_states(init, contact.n, replicas, rng)
    batch = dyn.simulate_batch(S, graphs, params, chain, horizon, rng)
    paths = dyn.paths_from_batch(batch, horizon, chain)
    first = batch[0]
    write_csv(out / "path.csv", cfg, ["t", "infected_count", "state_hex"],
              ([t, int(first[t].sum()), dyn.state_to_hex(first[t])] for t in range(horizon + 1)))
    if replicas > 1:
        rows = []
        for k, p in enumerate(paths):
            rows.append({
                "replica": k,
                "absorbed_at": p.absorbed_at,
                "social_cost": met.social_cost(p, horizon),
                "epidemic_spread": met.epidemic_spread(p, horizon),
                "endemic_fraction": met.endemic_fraction(p) if horizon >= 1 else None,
            })
        write_csv(out / "summary.csv", cfg,
                  ["replica", "absorbed_at", "social_cost", "epidemic_spread", "endemic_fraction"], rows)
    return EXIT_OK


FIG3_COLUMNS = ["delta_over_beta", "alpha", "rewire_p", "map", "converged", "iterations", "norm1_over_n",
                "min_component", "max_component", "stochastic_fraction", "stochastic_stderr"]


def cmd_fig3(cfg) -> int:
    spec = cfg["fig3"]
    alpha = _unit_closed("alpha", cfg["params"]["alpha"])
    contact = build_contact(cfg)
    graphs = dyn.Graphs(contact, build_social(cfg, contact))
    lam = spectral_radius(contact)
    if spec["ratios"] is not None:
        ratios = [float(r) for r in spec["ratios"]]
        if any(r <= 0 for r in ratios):
            raise ParameterError("ratios must be positive")
    else:
        ratios = exp.default_ratios(lam, _count("points", spec["points"], 1), float(spec["stretch"]))
    beta = spec["beta"]
    if beta is not None:
        _unit_open("fig3.beta", beta)
        if max(ratios) * beta >= 1.0:
            raise ParameterError(f"fig3.beta={beta} makes delta = ratio * beta reach 1; lower it")
    rows = exp.fig3_sweep(graphs, alpha, float(cfg["social"]["rewire_p"]), ratios, beta,
                          horizon=_count("horizon", spec["horizon"], 1),
                          replicas=_count("replicas", spec["replicas"], 1), master_seed=cfg["seed"])
    out = _outdir(cfg)
    write_csv(out / "fig3.csv", cfg, FIG3_COLUMNS, rows)
    bad = sum(not r["converged"] for r in rows)
    print(f"lambda_max={lam!r} beta={rows[0]['beta']!r} rows={len(rows)} nonconverged={bad}")
    return EXIT_OK


def cmd_fig4(cfg) -> int:
    spec = cfg["fig4"]
    params = params_from(cfg)
    cells = []
    for c in spec["cells"]:
        if len(c) != 2:
            raise ParameterError(f"fig4 cell must be [alpha, rewire_p], got {c!r}")
        cells.append((_unit_closed("alpha", c[0]), _unit_closed("rewire_p", c[1])))
    horizon = _count("horizon", spec["horizon"], 0)
    replicas = _count("replicas", spec["replicas"], 2)
    contact = build_contact(cfg)
    results = exp.fig4_cells(contact, cells, params.beta, params.delta, horizon, replicas, cfg["seed"])
    rows = []
    for res in results:
        for t in range(horizon + 1):
            rows.append({"alpha": res["alpha"], "rewire_p": res["rewire_p"], "t": t,
                         "mean_spread": float(res["mean"][t]), "stderr": float(res["stderr"][t]),
                         "replicas": res["replicas"]})
    out = _outdir(cfg)
    write_csv(out / "fig4.csv", cfg, ["alpha", "rewire_p", "t", "mean_spread", "stderr", "replicas"], rows)
    return EXIT_OK


def _parse_probe(text, horizon):
    """``"absorption_time>10"`` or ``"<metric spec>><threshold>"``, checked against the horizon."""
    left, sep, right = text.rpartition(">")
    if not sep:
        raise ParameterError(f"probe must look like '<metric>><threshold>', got {text!r}")
    if left == "absorption_time":
        tau = int(right)
        if tau > horizon:
            raise ParameterError(f"probe {text!r} looks past horizon {horizon}")
        return cpl.absorption_exceeds(tau)
    metric = met.parse_metric(left)
    if metric.window is not None and metric.window > horizon:
        raise ParameterError(f"probe {text!r} window exceeds horizon {horizon}")
    return cpl.metric_exceeds(metric, float(right))


def cmd_couple(cfg) -> int:
    spec = cfg["couple"]
    params = params_from(cfg)
    horizon = _count("horizon", spec["horizon"], 1)
    replicas = _count("replicas", spec["replicas"], 2)
    metrics = [met.parse_metric(m) for m in spec["metrics"]]
    for m in metrics:
        met.require_registered(m, integer=True)
        if m.window is not None and m.window > horizon:
            raise ParameterError(f"metric {m.name} window {m.window} exceeds horizon {horizon}")
    probes = [(p, _parse_probe(p, horizon)) for p in spec["probes"]]
    contact = build_contact(cfg)
    graphs = dyn.Graphs(contact, build_social(cfg, contact))
    init = parse_init(spec["init"], contact.n)
    out = _outdir(cfg)
    report = {"n": contact.n}

    failed = False
    if contact.n <= 5:
        r = cpl.verify_coupling_marginals_exact(graphs, params)
        report["exact"] = {"max_deviation": r.max_deviation, "max_table_error": r.max_table_error,
                           "off_order_mass": r.off_order_mass, "pairs_checked": r.pairs_checked,
                           "passed": r.passed(VERIFY_TOL)}
        failed = not r.passed(VERIFY_TOL)

    rng = child_rng(cfg["seed"], exp.STREAM_COUPLE)
    zg = {i: [] for i in range(len(metrics))}
    zh = {i: [] for i in range(len(metrics))}
    pin_h = {i: [] for i in range(len(probes))}
    pin_g = {i: [] for i in range(len(probes))}
    violations = 0
    truncated = 0
    csv_rows = []
    for k, cp in enumerate(cpl.coupled_replicas(init, graphs, params, horizon, replicas, rng)):
        ok = cp.order_ok()
        violations += int((~ok).sum())
        truncated += cp.absorbed_at_g is None
        h, g = cp.h, cp.g
        for i, m in enumerate(metrics):
            zg[i].append(m(g))
            zh[i].append(m(h))
        for i, (_, ind) in enumerate(probes):
            pin_h[i].append(bool(ind(h)))
            pin_g[i].append(bool(ind(g)))
        if spec.get("runs_csv", True):
            hc = cp.h_states.sum(axis=1)
            gc = cp.g_states.sum(axis=1)
            for t in range(len(gc)):
                csv_rows.append((k, t, int(hc[t]), int(gc[t]), bool(ok[t])))
    report["order_violations"] = violations
    report["truncated_replicas"] = truncated
    report["gaps"] = [cpl.gap_from_values(m.name if m.window is None else f"{m.name}:{m.window}", zg[i], zh[i]).record()
                      for i, m in enumerate(metrics)]
    report["probes"] = []
    for i, (text, _) in enumerate(probes):
        pr = cpl.probe_from_values(pin_h[i], pin_g[i])
        report["probes"].append({"probe": text, "benchmark_prob": pr.benchmark_prob,
                                 "distancing_prob": pr.distancing_prob, "difference": pr.difference,
                                 "cross_frequency": pr.cross_frequency, "replicas": pr.replicas})
    if spec.get("runs_csv", True):
        write_csv(out / "coupled_runs.csv", cfg, ["replica", "t", "h_infected", "g_infected", "order_ok"], csv_rows)
    write_json(out / "couple.json", cfg, report)
    if violations:
        failed = True
    print(f"order_violations={violations} exact_ok={not failed}")
    if failed:
        raise VerificationFailure("coupling verification failed")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "simulate": cmd_simulate, "fig3": cmd_fig3, "fig4": cmd_fig4,
            "couple": cmd_couple}


def _float_list(text):
    return [float(v) for v in text.split(",") if v.strip()]


def _cell_list(text):
    cells = []
    for item in text.split(";"):
        a, p = item.split(",")
        cells.append((float(a), float(p)))
    return cells


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="episis", description="Networked SIS epidemics with awareness-driven distancing.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON run config; flags override its fields")
        p.add_argument("--seed", type=int, help="master seed (u64)")
        p.add_argument("--out", help="output directory")
        g = p.add_argument_group("graph")
        g.add_argument("--family", choices=FAMILIES)
        g.add_argument("--n", type=int)
        g.add_argument("--p", type=float, help="Erdos-Renyi edge probability")
        g.add_argument("--r", type=float, help="geometric connection radius")
        g.add_argument("--m", type=int, help="preferential-attachment links per arrival")
        g.add_argument("--graph-seed", type=int)
        g.add_argument("--graph", help="read the contact graph from an edge-list file")
        g.add_argument("--lcc", action=argparse.BooleanOptionalAction, default=None,
                       help="reduce the contact graph to its largest connected component")
        s = p.add_argument_group("social graph")
        s.add_argument("--rewire-p", type=float)
        s.add_argument("--social-seed", type=int)
        s.add_argument("--social-graph", help="read the social graph from an edge-list file")

    def epi(p):
        e = p.add_argument_group("epidemic")
        e.add_argument("--beta", type=float)
        e.add_argument("--delta", type=float)
        e.add_argument("--alpha", type=float)

    p = sub.add_parser("generate", help="write contact (and social) edge lists and print a summary")
    common(p)

    p = sub.add_parser("simulate", help="run one chain and write sample paths")
    common(p)
    epi(p)
    p.add_argument("--chain", choices=dyn.KINDS)
    p.add_argument("--horizon", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--init", help="one-random | all | none | hex:<digits>")

    p = sub.add_parser("fig3", help="fixed-point norms and stochastic endemic levels over a ratio sweep")
    common(p)
    epi(p)
    p.add_argument("--ratios", type=_float_list, help="comma-separated delta/beta values")
    p.add_argument("--points", type=int)
    p.add_argument("--stretch", type=float, help="sweep up to stretch * lambda_max")
    p.add_argument("--fig3-beta", type=float, help="transmission probability for the sweep (default: auto)")
    p.add_argument("--horizon", type=int)
    p.add_argument("--replicas", type=int)

    p = sub.add_parser("fig4", help="epidemic spread over time per (alpha, rewire_p) cell")
    common(p)
    epi(p)
    p.add_argument("--cells", type=_cell_list, help="'a,p;a,p;...'")
    p.add_argument("--horizon", type=int)
    p.add_argument("--replicas", type=int)

    p = sub.add_parser("couple", help="coupling verification, expectation gaps and dominance probes")
    common(p)
    epi(p)
    p.add_argument("--horizon", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--init", help="one-random | all | none | hex:<digits>")
    p.add_argument("--metrics", type=lambda s: s.split(","), help="e.g. absorption_time,social_cost:50")
    p.add_argument("--probes", type=lambda s: s.split(","), help="e.g. absorption_time>10")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        return COMMANDS[args.command](cfg)
    except VerificationFailure as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VERIFY
    except (ParameterError, GraphFormatError, MetricContractError, ResourceError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except (KeyError, TypeError, ValueError) as e:
        print(f"error: invalid config value ({e})", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
