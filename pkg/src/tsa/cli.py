"""Command-line harness: instance generation, solvers, simulation, gap reports
and the experiment tables.

Exit codes: 0 success, 2 configuration error, 3 size-cap refusal, 4 time limit.
Every artifact is deterministic given the config (seeded RNG, fixed float
formatting); per-instance seeds derive as seed + index.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import gap_report, reports_to_csv, ub_fa, ub_oa, lp_relaxation_onesided
from .errors import ParseError, SizeRefusalError, TimeLimitError
from .exact import (DEFAULT_CAPS, SolveCaps, opt_fully_adaptive, opt_fully_static,
                    opt_one_sided_adaptive, opt_one_sided_static)
from .fullystatic import approx_fully_static
from .greedy import (GreedyOneSidedPolicy, SamplingConfig, cointoss_fully_adaptive,
                     sampling_side_selector)
from .instances import (CardinalityProfile, generate_random_instance,
                        instance_to_dict, load_instance, save_instance, tight_instance)
from .policies import dump_trace, monte_carlo, simulate_once
from .util import Deadline

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SIZE = 3
EXIT_TIME = 4


@dataclass
class ExperimentConfig:
    sizes: list = field(default_factory=lambda: [[2, 2], [3, 3]])
    seeds: int = 20
    seed: int = 0
    mode: str = "unconstrained"
    k_customer: object = None
    k_supplier: object = None
    initiating: str = "C"
    time_limit: object = None
    jobs: int = 1
    out: str = "."

    def validate(self):
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if not self.sizes:
            raise ValueError("sizes must be nonempty")
        for s in self.sizes:
            if len(s) != 2 or s[0] < 1 or s[1] < 1:
                raise ValueError(f"bad size entry {s}")

    def profile(self) -> CardinalityProfile:
        return CardinalityProfile(self.mode, self.k_customer, self.k_supplier, self.initiating)


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if getattr(args, "config", None):
        with open(args.config, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        known = set(ExperimentConfig().__dict__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields {sorted(unknown)}")
        for k, val in data.items():
            setattr(cfg, k, val)
    for k in ("sizes", "seeds", "seed", "mode", "k_customer", "k_supplier",
              "initiating", "time_limit", "jobs", "out"):
        val = getattr(args, k, None)
        if val is not None:
            setattr(cfg, k, val)
    cfg.validate()
    return cfg


def _parse_sizes(text: str):
    sizes = []
    for part in text.split(","):
        part = part.strip()
        if "x" in part:
            a, b = part.split("x")
            sizes.append([int(a), int(b)])
        else:
            sizes.append([int(part), int(part)])
    return sizes


def _instances_of(cfg: ExperimentConfig):
    out = []
    for (n, m) in cfg.sizes:
        for k in range(cfg.seeds):
            seed = cfg.seed + k
            label = f"n{n}m{m}_s{seed}"
            out.append((label, n, m, seed))
    return out


# ---------------------------------------------------------------------------
# Subcommands


def cmd_generate(args) -> int:
    cfg = _load_config(args)
    os.makedirs(cfg.out, exist_ok=True)
    if args.kind:
        inst = tight_instance(args.kind, args.n or 2)
        path = os.path.join(cfg.out, f"{args.kind}_n{args.n or 2}.json")
        save_instance(inst, path)
        print(path)
        return EXIT_OK
    for label, n, m, seed in _instances_of(cfg):
        inst = generate_random_instance(n, m, seed, cfg.profile())
        path = os.path.join(cfg.out, f"{label}.json")
        save_instance(inst, path)
        print(path)
    return EXIT_OK


_SOLVERS = ("fs", "os", "oa", "fa", "alg_fs", "ub_oa", "ub_fa", "rel2")


def _solve_one(inst, what, caps: SolveCaps, seed: int, deadline=None):
    values = {}
    if "fs" in what:
        values["OPT_FS"] = opt_fully_static(inst, caps)[0]
    if "os" in what:
        values["OPT_OS"] = max(opt_one_sided_static(inst, "C", caps),
                               opt_one_sided_static(inst, "S", caps))
    if "oa" in what:
        values["OPT_OA"] = max(opt_one_sided_adaptive(inst, "C", caps, deadline).value,
                               opt_one_sided_adaptive(inst, "S", caps, deadline).value)
    if "fa" in what:
        values["OPT_FA"] = opt_fully_adaptive(inst, caps, deadline).value
    if "alg_fs" in what:
        values["ALG_FS"] = approx_fully_static(inst, rng=np.random.default_rng([seed, 3])).value
    if "ub_oa" in what:
        values["UB_OA"] = ub_oa(inst)
    if "ub_fa" in what:
        values["UB_FA"] = ub_fa(inst)
    if "rel2" in what:
        values["REL2"] = max(lp_relaxation_onesided(inst, "C", inst.constrained).value,
                             lp_relaxation_onesided(inst, "S", inst.constrained).value)
    return values


def cmd_solve(args) -> int:
    inst = load_instance(args.instance)
    what = args.what.split(",") if args.what else ["fs", "os", "oa", "fa"]
    bad = [w for w in what if w not in _SOLVERS]
    if bad:
        raise ValueError(f"unknown solver(s) {bad}; choose from {_SOLVERS}")
    caps = SolveCaps(fa_max_agents=args.fa_cap, oa_max_side=args.oa_cap,
                     os_max_side=args.os_cap, fs_max_edges=args.fs_cap)
    deadline = Deadline(args.time_limit) if args.time_limit else None
    try:
        values = _solve_one(inst, what, caps, args.seed or 0, deadline)
    except SizeRefusalError as exc:
        print(f"size refusal: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except TimeLimitError as exc:
        print(f"time limit: {exc}", file=sys.stderr)
        return EXIT_TIME
    print(json.dumps({k: round(v, 12) for k, v in sorted(values.items())}, sort_keys=True))
    return EXIT_OK


def _build_policy(inst, name: str, seed: int):
    if name == "greedy-c":
        return GreedyOneSidedPolicy(inst, "C")
    if name == "greedy-s":
        return GreedyOneSidedPolicy(inst, "S")
    if name == "greedy-c-random-order":
        order = list(np.random.default_rng([seed, 11]).permutation(inst.n))
        return GreedyOneSidedPolicy(inst, "C", order=[int(x) for x in order])
    if name == "cointoss":
        return cointoss_fully_adaptive(inst, seed)
    if name == "sampling":
        return sampling_side_selector(inst, SamplingConfig(runs_override=100), seed)
    raise ValueError(f"unknown policy {name!r}")


def cmd_simulate(args) -> int:
    inst = load_instance(args.instance)
    policy = _build_policy(inst, args.policy, args.seed or 0)
    res = monte_carlo(inst, policy, args.runs, args.seed or 0)
    if args.trace:
        rng = np.random.default_rng([args.seed or 0, 0])
        _, trace = simulate_once(inst, policy, rng)
        with open(args.trace, "w", encoding="utf-8") as fh:
            dump_trace(trace, fh)
    out = {"mean": res.mean, "ci_half_width": res.half_width,
           "runs": res.runs, "seed": res.seed, "policy": args.policy}
    if hasattr(policy, "metadata"):
        out["metadata"] = {k: (v if not isinstance(v, float) else round(v, 12))
                           for k, v in sorted(policy.metadata.items())}
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def _gap_one(task):
    label, payload, caps_kw, seed = task
    from .instances import instance_from_dict

    inst = instance_from_dict(payload)
    return gap_report(inst, label, SolveCaps(**caps_kw), seed)


def _run_reports(cfg: ExperimentConfig, caps: SolveCaps, instances):
    tasks = []
    for label, n, m, seed in instances:
        inst = generate_random_instance(n, m, seed, cfg.profile())
        tasks.append((label, instance_to_dict(inst), caps.__dict__, seed))
    if cfg.jobs and cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            return list(pool.map(_gap_one, tasks))
    return [_gap_one(t) for t in tasks]


def cmd_gaps(args) -> int:
    cfg = _load_config(args)
    caps = SolveCaps()
    os.makedirs(cfg.out, exist_ok=True)
    timed_out = False
    deadline = Deadline(cfg.time_limit) if cfg.time_limit else None
    reports = []
    if args.instance:
        for k, path in enumerate(args.instance):
            inst = load_instance(path)
            label = os.path.splitext(os.path.basename(path))[0]
            try:
                if deadline is not None:
                    deadline.check()
                reports.append(gap_report(inst, label, caps, cfg.seed + k))
            except TimeLimitError:
                timed_out = True
                break
    else:
        try:
            reports = _run_reports(cfg, caps, _instances_of(cfg))
        except TimeLimitError:
            timed_out = True
    path = os.path.join(cfg.out, "gaps.csv")
    with open(path, "w", encoding="utf-8") as fh:
        reports_to_csv(reports, fh)
    print(path)
    return EXIT_TIME if timed_out else EXIT_OK


def _summary_rows(reports_by_size, names):
    rows = []
    for size_label, reports in reports_by_size:
        cells = [size_label]
        for name in names:
            vals = [r.ratios[name] for r in reports if r.ratios.get(name) is not None]
            if vals:
                cells += [format(min(vals), ".6f"), format(sum(vals) / len(vals), ".6f"),
                          format(max(vals), ".6f")]
            else:
                cells += ["", "", ""]
        rows.append(cells)
    return rows


def cmd_tables(args) -> int:
    cfg = _load_config(args)
    caps = SolveCaps()
    os.makedirs(cfg.out, exist_ok=True)
    by_size = []
    for (n, m) in cfg.sizes:
        instances = [(f"n{n}m{m}_s{cfg.seed + k}", n, m, cfg.seed + k) for k in range(cfg.seeds)]
        by_size.append((f"{n}x{m}", _run_reports(cfg, caps, instances)))

    all_reports = [r for _, reps in by_size for r in reps]
    with open(os.path.join(cfg.out, "instances.csv"), "w", encoding="utf-8") as fh:
        reports_to_csv(all_reports, fh)

    tables = {
        "table_fullystatic.csv": ["ALG_FS/OPT_FS"],
        "table_gaps.csv": ["OPT_OS/OPT_FS", "OPT_OA/ALG_OS", "UB_OA/ALG_OS",
                           "OPT_FA/OPT_OA", "UB_FA/ALG_OA"],
        "table_adaptive.csv": ["ALG_OA/OPT_OA", "ALG_OA/UB_OA",
                               "ALG_FA/OPT_FA", "ALG_FA/UB_FA"],
    }
    for fname, names in tables.items():
        with open(os.path.join(cfg.out, fname), "w", encoding="utf-8") as fh:
            header = ["size"]
            for name in names:
                header += [f"{name} min", f"{name} mean", f"{name} max"]
            fh.write(",".join(header) + "\n")
            for row in _summary_rows(by_size, names):
                fh.write(",".join(row) + "\n")
        print(os.path.join(cfg.out, fname))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="tsa", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON config file; flags override fields")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--sizes", type=_parse_sizes, default=None,
                        help="comma list, e.g. 2,3 or 2x3,4x4")
        sp.add_argument("--seeds", type=int, default=None, help="instances per size")
        sp.add_argument("--time-limit", dest="time_limit", type=float, default=None)
        sp.add_argument("--mode", choices=["unconstrained", "one-way", "two-way"], default=None)
        sp.add_argument("--k-customer", dest="k_customer", type=int, default=None)
        sp.add_argument("--k-supplier", dest="k_supplier", type=int, default=None)
        sp.add_argument("--initiating", choices=["C", "S"], default=None)

    g = sub.add_parser("generate", help="write instance JSON files")
    common(g)
    g.add_argument("--kind", choices=["prop1", "lemma3", "lemma6", "thm3"],
                   help="emit a tight construction instead of random instances")
    g.add_argument("--n", type=int, default=None, help="size parameter for --kind")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("solve", help="run exact solvers and bounds on one instance")
    s.add_argument("--instance", required=True)
    s.add_argument("--what", default=None, help=f"comma list from {_SOLVERS}")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--time-limit", dest="time_limit", type=float, default=None)
    s.add_argument("--fa-cap", type=int, default=DEFAULT_CAPS.fa_max_agents)
    s.add_argument("--oa-cap", type=int, default=DEFAULT_CAPS.oa_max_side)
    s.add_argument("--os-cap", type=int, default=DEFAULT_CAPS.os_max_side)
    s.add_argument("--fs-cap", type=int, default=DEFAULT_CAPS.fs_max_edges)
    s.set_defaults(func=cmd_solve)

    sim = sub.add_parser("simulate", help="Monte Carlo a policy on an instance")
    sim.add_argument("--instance", required=True)
    sim.add_argument("--policy", default="greedy-c",
                     choices=["greedy-c", "greedy-s", "greedy-c-random-order",
                              "cointoss", "sampling"])
    sim.add_argument("--runs", type=int, default=100)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--trace", default=None, help="write one run's trace (JSON lines)")
    sim.set_defaults(func=cmd_simulate)

    gp = sub.add_parser("gaps", help="gap report CSV for instances")
    common(gp)
    gp.add_argument("--instance", nargs="*", default=None, help="instance files (else generated)")
    gp.set_defaults(func=cmd_gaps)

    t = sub.add_parser("tables", help="experiment tables with min/mean/max per ratio")
    common(t)
    t.set_defaults(func=cmd_tables)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except (ValueError, ParseError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SizeRefusalError as exc:
        print(f"size refusal: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except TimeLimitError as exc:
        print(f"time limit: {exc}", file=sys.stderr)
        return EXIT_TIME


if __name__ == "__main__":
    sys.exit(main())
