"""Command-line entry point: ``dataring <subcommand> ...``."""

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import stats
from .config import NOISE_RULES, TOLERANCES, RunConfig, load_config, parse_text
from .crypto.dlog import decode_window
from .crypto.elgamal import KeyPair, collective_key, decrypt, encrypt, keygen
from .crypto.groups import get_group
from .data import (
    HistogramDataset,
    build_domain,
    domain_from_text,
    domain_to_text,
    load_dataset,
    read_csv,
    schema_from_rows,
    synth_records,
    synth_schema,
)
from .errors import ConfigurationError, DataRingError
from .partial_view import PartialView, verify_pv
from .query_eval import encode_query
from .rng import derive_seed
from .sim import experiments
from .sim.adversary import CheatStrategy
from .sim.sessions import Keys, honest_view, make_world, run_pv_session, run_query_session
from . import wire

DEFAULTS = RunConfig()
CONFIG_FLAGS = [
    ("--N", "N", int, "dataset size"),
    ("--a", "a", int, "domain cap, |domain| = a*N"),
    ("--V", "V", int, "partial view size"),
    ("--L", "L", int, "background knowledge size"),
    ("--epsilon", "epsilon", float, "privacy budget toward the querier"),
    ("--epsilon-s", "epsilon_s", float, "privacy budget toward the servers"),
    ("--eta", "eta", float, "tolerated honest rejection rate"),
    ("--theta", "theta", float, "adversary success target"),
    ("--m-q", "m_q", int, "real queries per session"),
    ("--m-t", "m_t", int, "test queries per session"),
    ("--tail", "tail", float, "Laplace tail mass outside the test tolerance"),
    ("--tolerance", "tolerance", str, f"test tolerance mode {TOLERANCES}; wide splits tail over the m_t tests"),
    ("--noise-rule", "noise_rule", str, f"Laplace scale rule {NOISE_RULES}"),
    ("--mix", "mix", str, "test kinds, used round-robin"),
    ("--group", "group", str, "p256, or sim (insecure, for fast simulation)"),
    ("--window", "window", int, "decode half-width, 0 means 4*N"),
    ("--seed", "seed", int, "master seed"),
    ("--trials", "trials", int, "Monte-Carlo trials per cell"),
    ("--workers", "workers", int, "worker processes"),
]

DEFAULT_THETAS = "0.91,0.93,0.95,0.96"
DEFAULT_NS = "500000,1000000,1500000,2000000"


def add_config_flags(parser, skip=()):
    parser.add_argument("--config", help="key=value file; flags override it")
    for flag, name, kind, text in CONFIG_FLAGS:
        if name in skip:
            continue
        parser.add_argument(flag, dest=name, type=kind, default=None,
                            help=f"{text} (default: {getattr(DEFAULTS, name)})")


def config_from(args, validate=True):
    """Config file plus flags; pass validate=False when N comes from a dataset later."""
    overrides = {name: getattr(args, name, None) for _, name, _, _ in CONFIG_FLAGS}
    return load_config(getattr(args, "config", None), overrides, validate)


def out(line=""):
    print(line, flush=True)


# -- data -----------------------------------------------------------------------


def save_data(directory, domain, dataset):
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    (d / "domain.txt").write_text(domain_to_text(domain), encoding="utf-8")
    (d / "dataset.bin").write_bytes(dataset.to_bytes())


def load_data(directory):
    d = Path(directory)
    domain = domain_from_text((d / "domain.txt").read_text(encoding="utf-8"))
    return domain, HistogramDataset.from_bytes((d / "dataset.bin").read_bytes(), domain)


def cmd_gen_data(args):
    cfg = config_from(args, validate=False)
    if cfg.N < 1 or cfg.a < 2:
        raise ConfigurationError("need N >= 1 and a >= 2")
    if args.radices:
        radices = [int(r) for r in args.radices.split(",")]
    else:
        # base-16 attributes, at least 16x more tuples than the capped domain
        radices = [16] * max(1, math.ceil(math.log(16 * cfg.domain_size, 16)))
    schema = synth_schema(radices)
    codes = synth_records(schema, cfg.N, derive_seed(cfg.seed, "records"))
    domain = build_domain(schema, codes, cfg.a, derive_seed(cfg.seed, "domain"))
    labels = [domain.label_of_code(int(c)) for c in codes]
    ds = HistogramDataset.from_labels(labels, domain)
    save_data(args.out, domain, ds)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(",".join(schema.names) + "\n")
            for c in codes:
                fh.write(",".join(schema.decode(int(c))) + "\n")
    out(f"N={ds.N}")
    out(f"domain_size={len(domain)}")
    out(f"attributes={len(radices)}")


def cmd_ingest(args):
    cfg = config_from(args, validate=False)
    header, rows = read_csv(args.csv)
    kinds = dict(part.split(":", 1) for part in args.kinds.split(",")) if args.kinds else {}
    previous = load_data(args.previous)[0].schema if args.previous else None
    schema = schema_from_rows(header, rows, kinds, previous)
    codes = sorted({schema.encode(r) for r in rows})
    domain = build_domain(schema, codes, None if args.uncapped else cfg.a, derive_seed(cfg.seed, "domain"))
    ds, dups = load_dataset(rows, domain)
    save_data(args.out, domain, ds)
    out(f"N={ds.N}")
    out(f"duplicates={dups}")
    out(f"domain_size={len(domain)}")


def cmd_keygen(args):
    group = get_group(args.group or DEFAULTS.group)
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    rng = None if args.seed is None else np.random.default_rng(derive_seed(args.seed, "keygen"))
    pairs = {}
    for name in ("server1", "server2", "querier"):
        pairs[name] = keygen(group, rng)
        (d / f"{name}.key").write_bytes(pairs[name].to_bytes())
    ck = collective_key([pairs["server1"], pairs["server2"]])
    (d / "collective.pub").write_bytes(bytes(ck.public))
    (d / "group.txt").write_text(group.name + "\n", encoding="utf-8")
    out(f"group={group.name}")
    out(f"collective={bytes(ck.public).hex()}")


def load_keys(directory, cfg):
    d = Path(directory)
    group = get_group((d / "group.txt").read_text().strip() if (d / "group.txt").exists() else cfg.group)
    pairs = [KeyPair.from_bytes((d / f"{n}.key").read_bytes(), group) for n in ("server1", "server2", "querier")]
    return Keys(*pairs, collective_key(pairs[:2]), decode_window(group, cfg.half_window)), group.name


def fit_config(cfg, dataset, **changes):
    """Take N and a from the dataset; the protocol needs |domain| = a*N."""
    if dataset.N == 0 or dataset.size % dataset.N:
        raise ConfigurationError(
            f"|domain|={dataset.size} is not a multiple of N={dataset.N}; ingest with a cap"
        )
    return cfg.replace(N=dataset.N, a=dataset.size // dataset.N, **changes).validate()


def world_for(args, cfg):
    """World from --data/--keys when given, else synthetic from the config."""
    dataset = None
    if getattr(args, "data", None):
        _, dataset = load_data(args.data)
        cfg = fit_config(cfg, dataset)
    cfg.validate()
    keys = None
    if getattr(args, "keys", None):
        keys, group = load_keys(args.keys, cfg)
        cfg = cfg.replace(group=group)
    return make_world(cfg, cfg.seed, "crypto", dataset=dataset, keys=keys), cfg


def print_bytes(counters):
    for edge, n in counters.items():
        out(f"bytes[{edge}]={n}")


def cmd_pv_run(args):
    world, cfg = world_for(args, config_from(args, validate=False))
    result = run_pv_session(world, derive_seed(cfg.seed, "pv-run"), n=args.n, mode="crypto")
    v = result.verdict
    out(f"verdict={'ACCEPT' if v.accept else 'REJECT'}")
    out(f"matched={v.matched}")
    out(f"r0={v.r0}")
    out(f"L={cfg.L}")
    if v.cause:
        out(f"cause={v.cause}")
    print_bytes(result.bytes)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        (d / "pv.bin").write_bytes(wire.encode_ciphertexts(result.view.ciphertexts))
        (d / "background.txt").write_text(
            "\n".join(str(int(l)) for l in world.background.labels) + "\n", encoding="utf-8"
        )


def cmd_pv_verify(args):
    _, dataset = load_data(args.data)
    cfg = fit_config(config_from(args, validate=False), dataset)
    keys, group = load_keys(args.keys, cfg)
    pv = PartialView(wire.decode_ciphertexts(Path(args.pv).read_bytes(), get_group(group)))
    labels = [int(x) for x in Path(args.background).read_text().split()]
    r0 = stats.choose_r0(cfg.N, cfg.V, len(labels), cfg.eta)
    v = verify_pv(pv, np.array(labels), r0, [keys.s1, keys.s2], keys.window)
    out(f"verdict={'ACCEPT' if v.accept else 'REJECT'}")
    out(f"matched={v.matched}")
    out(f"r0={r0}")
    if v.cause:
        out(f"cause={v.cause}")


def cmd_query_run(args):
    world, cfg = world_for(args, config_from(args, validate=False))
    seed = derive_seed(cfg.seed, "query-run")
    pv = honest_view(world, seed, "crypto")
    strategy = CheatStrategy.parse(args.strategy)
    res = run_query_session(world, seed, strategy, x=args.x, p_c=args.p_c, mode="crypto", pv=pv)
    out(f"flagged={int(res.flagged)}")
    out(f"cheated={int(res.cheated)}")
    for i, value in enumerate(res.released or []):
        out(f"answer[{i}]={value}")
    print_bytes(res.bytes)


def cmd_mean_query(args):
    domain, dataset = load_data(args.data)
    if domain.schema is None:
        raise ConfigurationError("mean-query needs a dataset with an attribute schema")
    names = domain.schema.names
    if args.attribute not in names:
        raise ConfigurationError(f"unknown attribute {args.attribute!r}")
    j = names.index(args.attribute)
    attr = domain.schema.attributes[j]
    where = dict(p.split("=", 1) for p in args.where.split(",")) if args.where else {}
    rows = [domain.values(i) for i in range(len(domain))]
    keep = [all(r[names.index(k)] == v for k, v in where.items()) for r in rows]
    buckets = list(attr.values)
    try:
        weights = [float(v) for v in buckets]
    except ValueError:
        raise ConfigurationError(f"attribute {attr.name!r} is not numeric") from None
    queries = [encode_query([i for i, r in enumerate(rows) if keep[i] and r[j] == v], domain) for v in buckets]
    queries.append(encode_query([i for i in range(len(rows)) if keep[i]], domain))
    cfg = config_from(args, validate=False)
    cfg = fit_config(cfg, dataset, m_q=len(queries), m_t=min(cfg.m_t, len(queries)))
    keys = load_keys(args.keys, cfg)[0] if args.keys else None
    world = make_world(cfg, cfg.seed, "crypto", dataset=dataset, keys=keys)
    seed = derive_seed(cfg.seed, "mean-query")
    res = run_query_session(world, seed, mode="crypto", pv=honest_view(world, seed, "crypto"), queries=queries)
    if res.flagged:
        out("flagged=1")
        return
    counts = res.released[:-1]
    total = sum(w * c for w, c in zip(weights, counts))
    count = res.released[-1]
    out(f"sum={total:g}")
    out(f"count={count}")
    out(f"mean={total / count:.6g}" if count else "mean=nan")


def cmd_benchmark(args):
    cfg = config_from(args)
    group = get_group(cfg.group)
    rng = np.random.default_rng(derive_seed(cfg.seed, "bench"))
    kp = keygen(group, rng)
    win = decode_window(group, cfg.half_window)

    def timed(label, fn, reps):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn()
        out(f"{label}_ms={(time.perf_counter() - t0) / reps * 1e3:.4f}")

    timed("keygen", lambda: keygen(group, rng), 50)
    ct = encrypt(kp, 12345, rng)
    timed("encrypt", lambda: encrypt(kp, 1, rng), 200)
    timed("decrypt", lambda: decrypt(kp, ct, win), 50)
    small = cfg.replace(N=args.n, V=max(1, args.n // 4), L=max(1, args.n // 4), m_q=4, m_t=4).validate()
    world = make_world(small, cfg.seed, "crypto")
    timed("pv_session", lambda: run_pv_session(world, 1, mode="crypto"), 1)
    pv = honest_view(world, 1, "crypto")
    timed("query_session", lambda: run_query_session(world, 1, mode="crypto", pv=pv), 1)


# -- experiments -----------------------------------------------------------------


def _floats(text):
    return [float(x) for x in text.split(",") if x]


def _ints(text):
    return [int(float(x)) for x in text.split(",") if x]


def run_experiment(name, cfg, params):
    """Dispatch one experiment from string parameters (as kept in manifests)."""
    if name == "nmin-table":
        return experiments.nmin_table(cfg, _floats(params.get("thetas", DEFAULT_THETAS)))
    if name == "lmin":
        return experiments.lmin_table(_ints(params.get("Ns", DEFAULT_NS)), float(params.get("rho", "0.01")), cfg.eta)
    if name == "pv-threshold":
        ns = _ints(params["ns"]) if params.get("ns") else [cfg.N, (9 * cfg.N) // 10, cfg.N // 2, cfg.V // 2, 0]
        return experiments.pv_threshold(cfg, ns, cfg.trials, cfg.seed)
    if name == "detection":
        strategies = params.get("strategies", "honest,modify:0.05,modify:0.1,modify:0.15,modify:0.2,modify:1,add:0.5,add:1")
        xs = _ints(params["xs"]) if params.get("xs") else list(range(0, cfg.m + 1))
        return experiments.detection_curve(cfg, strategies.split(","), xs, cfg.trials, cfg.seed,
                                           int(params.get("pd_trials", 2000)))
    if name == "eq6-check":
        cells = []
        for cell in params.get("cells", "modify:1@0.1,modify:1@0.5,add:0.0322@0.3,add:0.05@0.1").split(","):
            strategy, _, p_c = cell.partition("@")
            cells.append((strategy, float(p_c)))
        return experiments.closed_form_check(cfg, cells, cfg.trials, cfg.seed, int(params.get("pd_trials", 20000)))
    raise ConfigurationError(f"unknown experiment {name!r}")


EXPERIMENT_PARAMS = {
    "nmin-table": [("--thetas", "thetas", f"theta grid (default: {DEFAULT_THETAS})")],
    "lmin": [("--N", "Ns", f"comma-separated dataset sizes (default: {DEFAULT_NS})"),
             ("--rho", "rho", "V/N (default: 0.01)")],
    "pv-threshold": [("--ns", "ns", "true records kept, comma-separated (default: N, 0.9N, N/2, V/2, 0)")],
    "detection": [("--strategies", "strategies", "honest, modify:ALPHA, add:OMEGA; comma-separated"),
                  ("--xs", "xs", "incorrect answers per session (default: 0..m)"),
                  ("--pd-trials", "pd_trials", "sessions used to measure p_d (default: 2000)")],
    "eq6-check": [("--cells", "cells", "STRATEGY@P_C items, comma-separated"),
                  ("--pd-trials", "pd_trials", "sessions used to measure p_d (default: 20000)")],
}


def write_result(args, name, cfg, params, header, rows):
    text = experiments.to_csv(header, rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        extra = {"experiment": name, **{f"param.{k}": v for k, v in params.items()}}
        Path(str(args.out) + ".manifest").write_text(cfg.to_text(extra), encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_experiment(args):
    name = args.experiment
    if name == "replay":
        values, extra = parse_text(Path(args.manifest).read_text(encoding="utf-8"))
        cfg = RunConfig(**values).validate()
        name = extra.pop("experiment")
        params = {k[len("param."):]: v for k, v in extra.items() if k.startswith("param.")}
    else:
        cfg = config_from(args)
        params = {dest: getattr(args, dest) for _, dest, _ in EXPERIMENT_PARAMS[name] if getattr(args, dest) is not None}
    header, rows = run_experiment(name, cfg, params)
    write_result(args, name, cfg, params, header, rows)


# -- parser ----------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="dataring", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="synthetic dataset over a capped domain")
    add_config_flags(p)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--radices", help="attribute cardinalities, comma-separated")
    p.add_argument("--csv", help="also write the records as CSV here")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("ingest", help="CSV records to a dataset and domain manifest")
    add_config_flags(p)
    p.add_argument("--csv", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--kinds", help="NAME:integer pairs, comma-separated; others are categorical")
    p.add_argument("--previous", help="earlier output directory whose value codes are kept")
    p.add_argument("--uncapped", action="store_true", help="use the full attribute product")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("keygen", help="server and querier key files")
    p.add_argument("--out", required=True)
    p.add_argument("--group", choices=("p256", "sim"), default=None, help="default: p256")
    p.add_argument("--seed", type=int, default=None, help="deterministic keys (testing only)")
    p.set_defaults(func=cmd_keygen)

    for name, func, text in (("pv-run", cmd_pv_run, "collect and verify one partial view"),
                             ("query-run", cmd_query_run, "one query session with hidden tests")):
        p = sub.add_parser(name, help=text)
        add_config_flags(p)
        p.add_argument("--data", help="dataset directory (default: synthetic from the config)")
        p.add_argument("--keys", help="key directory (default: derived from the seed)")
        if name == "pv-run":
            p.add_argument("--n", type=int, default=None, help="true records kept (default: all)")
            p.add_argument("--out", help="write pv.bin and background.txt here")
        else:
            p.add_argument("--strategy", default="honest", help="honest, modify:ALPHA or add:OMEGA")
            p.add_argument("--x", type=int, default=None, help="exact number of incorrect answers")
            p.add_argument("--p-c", dest="p_c", type=float, default=None, help="per-query cheat probability")
        p.set_defaults(func=func)

    p = sub.add_parser("pv-verify", help="verify a stored partial view")
    add_config_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--keys", required=True)
    p.add_argument("--pv", required=True)
    p.add_argument("--background", required=True)
    p.set_defaults(func=cmd_pv_verify)

    p = sub.add_parser("experiment", help="experiment drivers with CSV output")
    esub = p.add_subparsers(dest="experiment", required=True)
    for name, params in EXPERIMENT_PARAMS.items():
        e = esub.add_parser(name)
        add_config_flags(e, skip=("N",) if name == "lmin" else ())
        for flag, dest, text in params:
            e.add_argument(flag, dest=dest, default=None, help=text)
        e.add_argument("--out", help="CSV path; a .manifest file is written beside it")
    e = esub.add_parser("replay", help="rerun an experiment from its manifest")
    e.add_argument("manifest")
    e.add_argument("--out")
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("mean-query", help="mean of a numeric attribute from count queries")
    add_config_flags(p)
    p.add_argument("--data", required=True)
    p.add_argument("--keys")
    p.add_argument("--attribute", required=True)
    p.add_argument("--where", help="NAME=VALUE filters, comma-separated")
    p.set_defaults(func=cmd_mean_query)

    p = sub.add_parser("benchmark", help="local timings, informational only")
    add_config_flags(p)
    p.add_argument("--n", type=int, default=200, help="dataset size for the session timings")
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except DataRingError as exc:
        print(json.dumps({"error": exc.code, "message": str(exc)}), file=sys.stderr)
        return 2
    except (ValueError, OSError, KeyError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
