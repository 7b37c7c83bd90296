"""Command-line pipeline around the library.

Every artifact starts with a format-version comment and the seed that
produced it, and every stage re-reads the artifacts of the stages before it,
so a run can be resumed, inspected, or reproduced file by file.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import centrality, compare, network, panel, potts, resolution, significance, synth, tree
from .errors import AnalysisError, ConfigError, CorrnetsError, DataError

STAGES = ("ingest", "networks", "sweep", "detect", "events", "roles", "mst",
          "shuffle-test", "carry")

NET_STATS_FORMAT = "corrnets net-stats v1"
INDEX_FORMAT = "corrnets partition-index v1"
FIXED_GAMMA_FORMAT = "corrnets fixed-gamma v1"
CARRY_FORMAT = "corrnets carry v1"


# ---------------------------------------------------------------------------
# configuration


def parse_config_file(path: str) -> dict[str, list[str]]:
    """key=value lines; '#' starts a comment; repeated keys accumulate."""
    out: dict[str, list[str]] = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value")
            key, _, value = line.partition("=")
            out.setdefault(key.strip().replace("-", "_"), []).append(value.strip())
    return out


def parse_grid(text: str) -> np.ndarray:
    """'lo:step:hi' inclusive of lo, marching by step while <= hi."""
    try:
        lo, step, hi = (float(tok) for tok in text.split(":"))
    except ValueError:
        raise ConfigError(f"bad grid {text!r}, expected lo:step:hi") from None
    if step <= 0 or hi < lo:
        raise ConfigError(f"bad grid {text!r}")
    count = int(np.floor((hi - lo) / step + 1e-9)) + 1
    return np.round(lo + step * np.arange(count), 10)


def parse_hours(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(tok) for tok in text.split(":"))
    except ValueError:
        raise ConfigError(f"bad hours {text!r}, expected lo:hi") from None
    if not (0 <= lo <= hi <= 23):
        raise ConfigError(f"bad hours {text!r}")
    return lo, hi


def parse_rule(text: str) -> tuple[str, str, str]:
    """'TARGET=NUM/DEN' with instruments of the form XXX/YYY."""
    target, _, expr = text.partition("=")
    parts = expr.split("/")
    if len(parts) != 4:
        raise ConfigError(f"bad derivation {text!r}, expected TARGET=AAA/BBB/CCC/DDD")
    num = f"{parts[0]}/{parts[1]}"
    den = f"{parts[2]}/{parts[3]}"
    return target.strip(), num.strip(), den.strip()


def parse_groups(text: str) -> tuple[tuple[int, float], ...]:
    """'count:loading,count:loading,...' for the synthetic factor panel."""
    groups = []
    for tok in text.split(","):
        count, _, loading = tok.partition(":")
        try:
            groups.append((int(count), float(loading)))
        except ValueError:
            raise ConfigError(f"bad group spec {tok!r}") from None
    return tuple(groups)


# ---------------------------------------------------------------------------
# small artifact helpers


def _outdir(args) -> str:
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _panel_path(args) -> str:
    return args.panel or os.path.join(args.out, "panel.csv")


def _load_panel(args):
    path = _panel_path(args)
    if not os.path.exists(path):
        raise DataError(f"panel artifact {path} not found; run ingest or synth first")
    return panel.read_panel(path)


def _window_map(threads: int, fn, items):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _read_fixed_gamma(path: str) -> float:
    with open(path) as fh:
        first = fh.readline().strip()
        if first != f"# {FIXED_GAMMA_FORMAT}":
            raise DataError(f"{path}: not a {FIXED_GAMMA_FORMAT} file")
        for line in fh:
            if line.startswith("gamma="):
                return float(line.partition("=")[2])
    raise DataError(f"{path}: no gamma entry")


def _partition_files(out: str) -> list[tuple[int, int, float, str]]:
    """(window, start_index, start_time, file) rows from the partition index."""
    path = os.path.join(out, "partitions_index.csv")
    if not os.path.exists(path):
        raise DataError(f"{path} not found; run detect first")
    with open(path, newline="") as fh:
        first = fh.readline().strip()
        if first != f"# {INDEX_FORMAT}":
            raise DataError(f"{path}: not a {INDEX_FORMAT} file")
        fh.readline()  # seed line
        rows = list(csv.reader(fh))
    if not rows or rows[0][0] != "window":
        raise DataError(f"{path}: missing index header")
    return [(int(r[0]), int(r[1]), float(r[2]), r[3]) for r in rows[1:]]


# ---------------------------------------------------------------------------
# stages


def stage_ingest(args) -> None:
    out = _outdir(args)
    if not args.input:
        raise ConfigError("ingest needs --input with quote rows")
    raw = panel.read_quotes(args.input, tz=args.tz)
    quotes = {name: panel.bucket_hourly(rows, name, tz=args.tz, liquid_hours=args.hours,
                                        exclude_weekends=args.exclude_weekends)
              for name, rows in sorted(raw.items())}
    rules = [parse_rule(r) for r in (args.derive or [])]
    built = panel.build_panel(quotes, rules=rules, expand=True)
    meta = {"base": sorted(raw), "rule": [f"{t}={n}/{d}" for t, n, d in rules]}
    panel.write_panel(os.path.join(out, "panel.csv"), built, seed=args.seed, meta=meta)
    print(f"ingest: {built.n_instruments} instruments x {built.n_steps} steps "
          f"({built.dropped} steps dropped) -> {out}/panel.csv")


def stage_synth(args) -> None:
    out = _outdir(args)
    spec = synth.FactorModelSpec(groups=parse_groups(args.groups), length=args.length,
                                 noise=args.noise, hierarchy=args.hierarchy, seed=args.seed)
    built = synth.generate_panel(spec)
    meta = {"base": list(built.instruments), "rule": []}
    built = panel.expand_inverses(built)
    panel.write_panel(os.path.join(out, "panel.csv"), built, seed=args.seed, meta=meta)
    print(f"synth: {built.n_instruments} instruments x {built.n_steps} steps -> {out}/panel.csv")


def stage_networks(args) -> None:
    out = _outdir(args)
    pnl, _ = _load_panel(args)
    seq = network.build_sequence(pnl, args.T, args.dt, include_self_edges=args.self_edges)
    stds = network.edge_weight_std(seq)
    path = os.path.join(out, "net_stats.csv")
    with open(path, "w", newline="") as fh:
        fh.write(f"# {NET_STATS_FORMAT}\n")
        fh.write(f"# seed={args.seed}\n")
        fh.write(f"# T={args.T}\n# dt={args.dt}\n")
        w = csv.writer(fh)
        w.writerow(["window", "start_index", "start_time", "mean_weight", "std_weight"])
        for i, net in enumerate(seq):
            w.writerow([i, net.window_start, repr(float(pnl.times[net.window_start])),
                        repr(network.mean_edge_weight(net)), repr(float(stds[i]))])
    if args.dump_networks:
        ndir = os.path.join(out, "networks")
        os.makedirs(ndir, exist_ok=True)
        for i, net in enumerate(seq):
            network.write_network(os.path.join(ndir, f"net_{i:04d}.csv"), net, seed=args.seed)
    print(f"networks: {len(seq)} windows -> {path}")


def stage_sweep(args) -> None:
    out = _outdir(args)
    pnl, _ = _load_panel(args)
    seq = network.build_sequence(pnl, args.T, args.dt)
    grid = parse_grid(args.gamma_grid) if args.gamma_grid else resolution.default_gamma_grid()
    sdir = os.path.join(out, "sweeps")
    os.makedirs(sdir, exist_ok=True)

    def run_one(item):
        i, net = item
        return resolution.sweep(net, grid=grid, heuristic=args.heuristic, seed=args.seed)

    sweeps = _window_map(args.threads, run_one, list(enumerate(seq)))
    for i, sw in enumerate(sweeps):
        resolution.write_sweep(os.path.join(sdir, f"sweep_{i:04d}.csv"), sw,
                               window_start=seq[i].window_start, seed=args.seed)
    with open(os.path.join(out, "plateaus.csv"), "w", newline="") as fh:
        fh.write("# corrnets plateaus v1\n")
        fh.write(f"# seed={args.seed}\n")
        w = csv.writer(fh)
        w.writerow(["window", "gamma_lo", "gamma_hi", "n_communities", "is_main"])
        for i, sw in enumerate(sweeps):
            plateaus = resolution.find_plateaus(sw)
            main = resolution.main_plateau(plateaus, sw.n)
            for p in plateaus:
                w.writerow([i, repr(p.gamma_lo), repr(p.gamma_hi), p.n_communities,
                            int(main is not None and p.gamma_lo == main.gamma_lo)])
    gamma = resolution.fixed_resolution(sweeps)
    with open(os.path.join(out, "fixed_gamma.txt"), "w") as fh:
        fh.write(f"# {FIXED_GAMMA_FORMAT}\n")
        fh.write(f"# seed={args.seed}\n")
        fh.write(f"gamma={gamma!r}\n")
    print(f"sweep: {len(sweeps)} windows x {len(grid)} resolutions; fixed gamma {gamma}")


def stage_detect(args) -> None:
    out = _outdir(args)
    pnl, _ = _load_panel(args)
    gamma = args.gamma
    if gamma is None:
        gpath = os.path.join(out, "fixed_gamma.txt")
        if not os.path.exists(gpath):
            raise ConfigError("detect needs --gamma or a prior sweep's fixed_gamma.txt")
        gamma = _read_fixed_gamma(gpath)
    seq = network.build_sequence(pnl, args.T, args.dt)
    pdir = os.path.join(out, "partitions")
    os.makedirs(pdir, exist_ok=True)

    def run_one(item):
        i, net = item
        model = potts.EnergyModel.from_network(net, gamma)
        part = potts.minimize(model, heuristic=args.heuristic, seed=args.seed)
        return part, potts.scaled_energy(model, part)

    results = _window_map(args.threads, run_one, list(enumerate(seq)))
    index_path = os.path.join(out, "partitions_index.csv")
    with open(index_path, "w", newline="") as fh:
        fh.write(f"# {INDEX_FORMAT}\n")
        fh.write(f"# seed={args.seed}\n")
        w = csv.writer(fh)
        w.writerow(["window", "start_index", "start_time", "file", "K", "H", "Qs"])
        for i, (net, (part, qs)) in enumerate(zip(seq, results)):
            fname = f"partitions/part_{i:04d}.csv"
            potts.write_partition(os.path.join(out, fname), part, net.labels,
                                  q_s=qs, seed=args.seed)
            w.writerow([i, net.window_start, repr(float(pnl.times[net.window_start])),
                        fname, part.K, repr(part.energy), repr(qs)])
    print(f"detect: {len(seq)} windows at gamma={gamma} -> {index_path}")


def stage_events(args) -> None:
    out = _outdir(args)
    rows = _partition_files(out)
    parts, times = [], {}
    for window, _, start_time, fname in rows:
        part, _, _ = potts.read_partition(os.path.join(out, fname))
        parts.append(part)
        times[window] = start_time
    series = compare.detect_events(parts)
    window_times = np.array([times[w] for w, *_ in rows])
    path = os.path.join(out, "events.csv")
    compare.write_events(path, series, window_times, seed=args.seed)
    n4 = len(series.flags[4])
    print(f"events: {len(series.vhat)} transitions, {n4} above 4 sigma -> {path}")


def stage_roles(args) -> None:
    out = _outdir(args)
    pnl, _ = _load_panel(args)
    rows = _partition_files(out)
    records: list[centrality.RoleRecord] = []

    def run_one(row):
        window, start, _, fname = row
        part, labels, meta = potts.read_partition(os.path.join(out, fname))
        net = network.build_network(pnl, start, args.T)
        if labels != net.labels:
            raise DataError(f"{fname}: node labels do not match the panel")
        gamma = float(meta["gamma"])
        return centrality.compute_roles(net, part, gamma, window=window)

    for recs in _window_map(args.threads, run_one, rows):
        records.extend(recs)
    path = os.path.join(out, "roles.csv")
    centrality.write_roles(path, records, seed=args.seed)
    print(f"roles: {len(records)} node-window records -> {path}")


def stage_mst(args) -> None:
    out = _outdir(args)
    pnl, _ = _load_panel(args)
    seq = network.build_sequence(pnl, args.T, args.dt)
    mdir = os.path.join(out, "mst")
    os.makedirs(mdir, exist_ok=True)

    def run_one(item):
        i, net = item
        d = tree.network_distance(net.A)
        return tree.mst(d), tree.linkage(d, "single"), tree.linkage(d, "average")

    results = _window_map(args.threads, run_one, list(enumerate(seq)))
    for i, (net, (t, single, average)) in enumerate(zip(seq, results)):
        tree.write_tree(os.path.join(mdir, f"mst_{i:04d}.csv"), t, net.labels,
                        window_start=net.window_start, seed=args.seed)
        tree.write_dendrogram(os.path.join(mdir, f"dendro_single_{i:04d}.csv"), single,
                              "single", window_start=net.window_start, seed=args.seed)
        tree.write_dendrogram(os.path.join(mdir, f"dendro_average_{i:04d}.csv"), average,
                              "average", window_start=net.window_start, seed=args.seed)
    print(f"mst: {len(seq)} windows -> {mdir}/")


def stage_shuffle_test(args) -> None:
    out = _outdir(args)
    pnl, meta = _load_panel(args)
    bases = tuple(meta.get("base", ()))
    if not bases:
        raise ConfigError("panel artifact lists no base instruments for shuffling")
    rules = tuple(parse_rule(r) for r in meta.get("rule", []) if r)
    gamma = args.gamma
    if gamma is None:
        gpath = os.path.join(out, "fixed_gamma.txt")
        gamma = _read_fixed_gamma(gpath) if os.path.exists(gpath) else 1.45
    spec = significance.ShuffleSpec(bases, rules, realizations=args.realizations,
                                    seed=args.seed)
    report = significance.permutation_test(pnl, spec, gamma, heuristic=args.heuristic,
                                           T=args.T, dt=args.dt, detection_seed=args.seed)
    path = os.path.join(out, "shuffle_report.txt")
    significance.write_report(path, report)
    print(f"shuffle-test: p={report.p_value:.4f} over {report.realizations} "
          f"realizations -> {path}")


def stage_carry(args) -> None:
    out = _outdir(args)
    pnl, _ = _load_panel(args)
    if not args.rates:
        raise ConfigError("carry needs --rates with (date, currency, rate) rows")
    rates = panel.align_rates(pnl.times, panel.read_interest_rates(args.rates))
    ups = panel.carry_trade_index(pnl, rates, numeraire=args.numeraire)
    path = os.path.join(out, "carry.csv")
    with open(path, "w", newline="") as fh:
        fh.write(f"# {CARRY_FORMAT}\n")
        fh.write(f"# seed={args.seed}\n")
        fh.write(f"# numeraire={args.numeraire}\n")
        w = csv.writer(fh)
        w.writerow(["time", "upsilon"])
        w.writerow(["start", repr(1.0)])
        for t, u in zip(pnl.times, ups[1:]):
            w.writerow([repr(float(t)), repr(float(u))])
    print(f"carry: {len(ups) - 1} steps, final {ups[-1]:.6f} -> {path}")


STAGE_FUNCS = {
    "ingest": stage_ingest,
    "networks": stage_networks,
    "sweep": stage_sweep,
    "detect": stage_detect,
    "events": stage_events,
    "roles": stage_roles,
    "mst": stage_mst,
    "shuffle-test": stage_shuffle_test,
    "carry": stage_carry,
}


def stage_run(args) -> None:
    if args.stage is not None and args.stage not in STAGES:
        raise ConfigError(f"unknown stage {args.stage!r}; choose from {', '.join(STAGES)}")
    for name in STAGES:
        if name == "ingest":
            if args.input:
                stage_ingest(args)
            elif args.groups:
                stage_synth(args)
            elif not os.path.exists(_panel_path(args)):
                raise ConfigError("run needs --input quotes, --groups for synthetic "
                                  "data, or an existing panel artifact")
        elif name == "shuffle-test":
            if args.realizations > 0:
                stage_shuffle_test(args)
        elif name == "carry":
            if args.rates:
                stage_carry(args)
        else:
            STAGE_FUNCS[name](args)
        if args.stage == name:
            break


# ---------------------------------------------------------------------------
# argument parsing


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value defaults file; flags win")
    p.add_argument("--out", default="out", help="artifact directory (default: out)")
    p.add_argument("--panel", help="panel artifact path (default: <out>/panel.csv)")
    p.add_argument("--input", help="raw quote rows (timestamp, instrument, bid, ask)")
    p.add_argument("--T", type=int, default=200, help="window length in return steps")
    p.add_argument("--dt", type=int, default=20, help="window step in return steps")
    p.add_argument("--gamma", type=float, default=None, help="fixed resolution")
    p.add_argument("--gamma-grid", default=None, help="sweep grid as lo:step:hi")
    p.add_argument("--heuristic", default="greedy",
                   choices=["greedy", "anneal", "spectral", "brute"])
    p.add_argument("--seed", type=int, default=0, help="master seed for the run")
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                   help="window-level parallelism")
    p.add_argument("--stage", default=None, help="with run: stop after this stage")
    p.add_argument("--hours", type=parse_hours, default=(7, 18),
                   help="liquid window as lo:hi local hours, inclusive")
    p.add_argument("--tz", default="UTC", help="timezone for hourly bucketing")
    p.add_argument("--exclude-weekends", action="store_true")
    p.add_argument("--derive", action="append",
                   help="cross-rate rule TARGET=AAA/BBB/CCC/DDD, repeatable")
    p.add_argument("--realizations", type=int, default=0,
                   help="shuffle realizations (0 skips the test)")
    p.add_argument("--rates", help="interest rates csv (date, currency, rate)")
    p.add_argument("--numeraire", default="USD")
    p.add_argument("--self-edges", action="store_true")
    p.add_argument("--dump-networks", action="store_true")
    p.add_argument("--groups", default=None,
                   help="synthetic factor groups as count:loading,...")
    p.add_argument("--length", type=int, default=2000, help="synthetic panel steps")
    p.add_argument("--noise", type=float, default=1.0)
    p.add_argument("--hierarchy", type=float, default=0.0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="corrnets",
        description="correlation networks, their communities, and how both drift")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "ingest": "hourly panel from raw quotes",
        "synth": "synthetic factor panel",
        "networks": "rolling correlation networks and their statistics",
        "sweep": "resolution sweep, plateaus, fixed gamma",
        "detect": "communities per window at a fixed gamma",
        "events": "reorganization events from partition changes",
        "roles": "betweenness and eigenvector roles per node",
        "mst": "spanning trees and dendrograms per window",
        "shuffle-test": "permutation significance test",
        "carry": "carry-trade index over the panel",
        "run": "full pipeline, optionally stopping after --stage",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        _add_common(p)
    return parser


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    """Fill still-default values from the config file; flags keep priority."""
    if not args.config:
        return args
    conf = parse_config_file(args.config)
    parser = build_parser()
    defaults = parser.parse_args([args.command])
    casts = {"T": int, "dt": int, "seed": int, "threads": int, "realizations": int,
             "length": int, "gamma": float, "noise": float, "hierarchy": float,
             "hours": parse_hours, "exclude_weekends": lambda v: v.lower() in ("1", "true", "yes"),
             "self_edges": lambda v: v.lower() in ("1", "true", "yes"),
             "dump_networks": lambda v: v.lower() in ("1", "true", "yes")}
    for key, values in conf.items():
        if not hasattr(args, key):
            raise ConfigError(f"unknown config key {key!r}")
        if getattr(args, key) != getattr(defaults, key):
            continue  # flag was given explicitly
        if key == "derive":
            setattr(args, key, values)
        else:
            cast = casts.get(key, str)
            setattr(args, key, cast(values[-1]))
    return args


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args = _apply_config(args)
        if args.command == "run":
            stage_run(args)
        elif args.command == "synth":
            stage_synth(args)
        else:
            STAGE_FUNCS[args.command](args)
    except (CorrnetsError, FileNotFoundError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
