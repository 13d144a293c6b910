"""Command-line entry point: ``nlcomm <subcommand> ...``.

Exit codes: 0 success, 2 bad configuration, 3 computation failure,
4 unreadable or malformed input file.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import asdict, dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any

from . import __version__
from .bounds import (BudgetExceeded, closed_form_local_bound, isotropic_threshold,
                     local_bound_decoder_scan, local_bound_enumerate, ns_bound_lp)
from .correlations import (Correlation, MalformedCorrelation, from_function, from_json, i3322_extremal, isotropic_mix,
                           mix, pairwise_pr_candidate, pr_box, white_noise)
from .protocols import (cs_facet_protocol, facet_task_protocol, i3322_printed_protocol,
                        i3322_protocol, prbox_task_protocol)
from .rational import frac, frac_str
from .tasks import (Task, build_cs, build_i3322_task, build_prbox_task, build_table1,
                    task_from_json, task_to_json)
from .wirecut import (bell_from_task, functional_to_json, i3322_functional, render_functional,
                      signalling_counterexample, simulate_assisted)

EXIT_OK, EXIT_CONFIG, EXIT_COMPUTE, EXIT_INPUT = 0, 2, 3, 4
JOBS_ENV = "NLCOMM_JOBS"


class ConfigError(ValueError):
    pass


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    task: str | None = None
    d: int | None = None
    k: int | None = None
    task_file: str | None = None
    box: str | None = None
    p: str | None = None
    protocol: str = "auto"
    method: str | None = None
    level: str | None = None
    dims: tuple[int, int] | None = None
    restarts: int = 100
    seed: int = 0
    jobs: int = 1
    max_sweeps: int = 500
    enumeration_cap: int = 10 ** 8
    lp_size: int = 10 ** 5
    p_grid: str | None = None
    format: str = "json"
    out: str | None = None

    def normalized(self) -> dict:
        data = asdict(self)
        if data["dims"] is not None:
            data["dims"] = list(data["dims"])
        return {k: v for k, v in data.items() if v is not None}

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        if data.get("dims") is not None:
            data["dims"] = tuple(data["dims"])
        return cls(**data)


# ---------------------------------------------------------------------------
# parsing helpers

def parse_box(spec: str, dims_hint: tuple | None = None) -> Correlation:
    """Box from a short spec: pr:a,b,c | i3322:1 | i3322:2 | i3322:mid | white | candidate:d | signalling | file:path."""
    kind, _, arg = spec.partition(":")
    if kind == "pr":
        bits = [int(v) for v in arg.replace(",", "")] if arg else [0, 0, 0]
        if len(bits) != 3 or any(b not in (0, 1) for b in bits):
            raise ConfigError(f"PR box needs three bits, got {arg!r}")
        return pr_box(*bits)
    if kind == "i3322":
        if arg in ("1", "2"):
            return i3322_extremal(int(arg))
        if arg == "mid":
            return mix([i3322_extremal(1), i3322_extremal(2)], [Fraction(1, 2), Fraction(1, 2)])
        raise ConfigError(f"i3322 box must be 1, 2 or mid, got {arg!r}")
    if kind == "candidate":
        return pairwise_pr_candidate(int(arg))
    if kind == "white":
        if arg:
            return white_noise(*[int(v) for v in arg.split(",")])
        if dims_hint is None:
            raise ConfigError("white noise needs dims (white:X,Y,A,B)")
        return white_noise(*dims_hint)
    if kind == "signalling":
        return from_function((2, 2, 2, 2), lambda a, b, x, y: Fraction(1, 2) if a == y else 0,
                             label="delta_ay/2")
    if kind == "file":
        try:
            return from_json(_read_json(arg))
        except (TypeError, MalformedCorrelation) as exc:
            raise InputError(f"malformed box file {arg}: {exc}") from exc
    raise ConfigError(f"unknown box spec {spec!r}")


def _read_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"malformed JSON in {path}: {exc}") from exc


def build_task(cfg: RunConfig) -> Task:
    if cfg.task_file:
        try:
            return task_from_json(_read_json(cfg.task_file))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed task file {cfg.task_file}: {exc}") from exc
    if cfg.task == "cs":
        if cfg.d is None or cfg.k is None:
            raise ConfigError("task cs needs --d and --k")
        return build_cs(cfg.d, cfg.k)
    if cfg.task == "table1":
        return build_table1()
    if cfg.task == "prbox":
        d = cfg.d or 2
        pstar = parse_box(cfg.box) if cfg.box else (pr_box(0, 0, 0) if d == 2 else pairwise_pr_candidate(d))
        return build_prbox_task(pstar, d)
    if cfg.task == "i3322":
        return build_i3322_task()
    raise ConfigError(f"unknown task family {cfg.task!r}; use cs, table1, prbox, i3322 or --task-file")


def default_box(task: Task) -> Correlation:
    if task.facet:
        return task.facet[0]
    return pr_box(0, 0, 0)


def pick_protocol(task: Task, box: Correlation, name: str):
    if name == "auto":
        name = {"cs": "cs-facet", "prbox": "prbox", "i3322": "i3322"}.get(task.family, "facet")
    makers = {"cs-facet": cs_facet_protocol, "facet": facet_task_protocol,
              "prbox": prbox_task_protocol, "i3322": i3322_protocol,
              "i3322-printed": i3322_printed_protocol}
    if name not in makers:
        raise ConfigError(f"unknown protocol {name!r}; choose from {sorted(makers)}")
    return makers[name](task, box)


def parse_grid(spec: str) -> list[Fraction]:
    try:
        start, stop, step = (Fraction(v) for v in spec.split(":"))
    except ValueError as exc:
        raise ConfigError(f"grid must be start:stop:step, got {spec!r}") from exc
    if step <= 0 or stop < start:
        raise ConfigError(f"empty or backwards grid {spec!r}")
    out, v = [], start
    while v <= stop:
        out.append(v)
        v += step
    return out


def rational(v) -> dict:
    return {"value": frac_str(v), "float": float(v)}


# ---------------------------------------------------------------------------
# output

def write_atomic(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def envelope(cfg: RunConfig, result: dict) -> dict:
    return {"config": cfg.normalized(), "version": __version__, "result": result}


# ---------------------------------------------------------------------------
# commands

def cmd_task_build(cfg: RunConfig) -> str:
    return dump_json(task_to_json(build_task(cfg)))


def cmd_bounds(cfg: RunConfig) -> str:
    target = i3322_functional() if cfg.task == "i3322-expression" else build_task(cfg)
    method = cfg.method or "decoder-scan"
    if method == "decoder-scan":
        res = local_bound_decoder_scan(target, jobs=cfg.jobs)
    elif method == "enumerate":
        res = local_bound_enumerate(target, budget=cfg.enumeration_cap, jobs=cfg.jobs)
    elif method == "closed-form":
        res = closed_form_local_bound(target) if isinstance(target, Task) else None
        if res is None:
            raise ConfigError(f"no closed form for task {cfg.task or cfg.task_file!r}")
    elif method == "lp":
        res = ns_bound_lp(target, max_variables=cfg.lp_size)
    else:
        raise ConfigError(f"unknown bound method {method!r}")
    out = res.to_json()
    out["budget"] = {"enumeration_cap": cfg.enumeration_cap, "lp_size": cfg.lp_size, "jobs": cfg.jobs}
    return dump_json(envelope(cfg, out))


def cmd_bell_export(cfg: RunConfig) -> str:
    if cfg.task == "i3322-expression":
        bf, task = i3322_functional(), None
    else:
        task = build_task(cfg)
        bf = bell_from_task(task)
    bound = local_bound_decoder_scan(task if task is not None else bf).value
    if cfg.format == "text":
        return render_functional(bf, bound)
    return dump_json(functional_to_json(bf, bound, task))


def cmd_protocol_run(cfg: RunConfig) -> str:
    task = build_task(cfg)
    design = parse_box(cfg.box, None) if cfg.box and not cfg.box.startswith("white") else default_box(task)
    proto = pick_protocol(task, design, cfg.protocol)
    box = design
    if cfg.box and cfg.box.startswith("white"):
        box = white_noise(*design.dims)
    if cfg.p is not None:
        box = isotropic_mix(frac(cfg.p), box)
    sim = simulate_assisted(task, proto.with_box(box))
    result = {"protocol": proto.label, "payoff": rational(sim.payoff), "normalized": sim.normalized,
              "unnormalized_inputs": json.loads(json.dumps(sim.unnormalized_inputs)),
              "queries": {json.dumps(k): v for k, v in proto.queries.items()},
              "messages": {json.dumps([k[0], k[1]]): v for k, v in proto.messages.items()}}
    return dump_json(envelope(cfg, result))


def cmd_sweep_isotropic(cfg: RunConfig) -> str:
    task = build_task(cfg)
    design = parse_box(cfg.box) if cfg.box else default_box(task)
    proto = pick_protocol(task, design, cfg.protocol)
    line = isotropic_threshold(task, proto)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["p", "payoff", "local_bound", "advantage", "threshold"])
    for p in parse_grid(cfg.p_grid or "0:1:0.05"):
        payoff = simulate_assisted(task, proto.with_box(isotropic_mix(p, design))).payoff
        w.writerow([_g(p), _g(payoff), _g(line.local_bound), _g(payoff - line.local_bound),
                    _g(line.threshold)])
    return buf.getvalue()


def _g(v) -> str:
    return f"{float(v):.12g}"


def cmd_seesaw(cfg: RunConfig) -> str:
    from .quantum import seesaw
    if cfg.task == "i3322-expression":
        bf = i3322_functional()
    else:
        bf = bell_from_task(build_task(cfg))
    dA, dB = cfg.dims or (2, 2)
    res = seesaw(bf, dA, dB, restarts=cfg.restarts, seed=cfg.seed, max_sweeps=cfg.max_sweeps,
                 jobs=cfg.jobs)
    return dump_json(envelope(cfg, res.to_json()))


def cmd_npa_export(cfg: RunConfig) -> str:
    from .npa import build_moment_spec, export_sdpa
    bf = i3322_functional() if cfg.task == "i3322-expression" else bell_from_task(build_task(cfg))
    level = cfg.level or "2"
    level = level if level == "1+AB" else int(level)
    return export_sdpa(build_moment_spec(bf, level))


def cmd_demo_signalling(cfg: RunConfig) -> str:
    box = parse_box(cfg.box or "signalling")
    task, proto, x_star = signalling_counterexample(box)
    sim = simulate_assisted(task, proto)
    result = {"x_star": x_star, "normalized": sim.normalized,
              "total_mass": {str(m): rational(t) for m, t in zip(task.inputs, sim.totals)},
              "total_mass_at_x_star": rational(sim.totals[x_star - 1])}
    return dump_json(envelope(cfg, result))


COMMANDS = {
    "task-build": cmd_task_build,
    "bounds": cmd_bounds,
    "bell-export": cmd_bell_export,
    "protocol-run": cmd_protocol_run,
    "sweep-isotropic": cmd_sweep_isotropic,
    "seesaw": cmd_seesaw,
    "npa-export": cmd_npa_export,
    "demo-signalling": cmd_demo_signalling,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nlcomm", description="Correlation-assisted communication tasks")
    sub = ap.add_subparsers(dest="command", required=True)
    default_jobs = int(os.environ.get(JOBS_ENV, "1"))

    def common(p, task=True):
        if task:
            p.add_argument("--task", choices=["cs", "table1", "prbox", "i3322", "i3322-expression"])
            p.add_argument("--d", type=int)
            p.add_argument("--k", type=int)
            p.add_argument("--task-file")
        p.add_argument("--box", help="pr:abc | i3322:1|2|mid | candidate:d | white[:X,Y,A,B] | signalling | file:path")
        p.add_argument("--jobs", type=int, default=default_jobs)
        p.add_argument("--out")

    for name in COMMANDS:
        p = sub.add_parser(name)
        common(p, task=name != "demo-signalling")
        if name == "bounds":
            p.add_argument("--method", choices=["decoder-scan", "enumerate", "closed-form", "lp"],
                           default="decoder-scan")
            p.add_argument("--enumeration-cap", type=int, default=10 ** 8)
            p.add_argument("--lp-size", type=int, default=10 ** 5)
        if name in ("protocol-run", "sweep-isotropic"):
            p.add_argument("--protocol", default="auto")
        if name == "protocol-run":
            p.add_argument("--p", help="isotropic weight of the box, e.g. 3/4")
        if name == "sweep-isotropic":
            p.add_argument("--p-grid", default="0:1:0.05")
        if name == "bell-export":
            p.add_argument("--format", choices=["json", "text"], default="json")
        if name == "seesaw":
            p.add_argument("--dims", type=int, nargs=2, default=(2, 2))
            p.add_argument("--restarts", type=int, default=100)
            p.add_argument("--seed", type=int, default=0)
            p.add_argument("--max-sweeps", type=int, default=500)
        if name == "npa-export":
            p.add_argument("--level", choices=["1", "1+AB", "2"], default="2")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    data = {k: v for k, v in vars(ns).items() if v is not None}
    if "dims" in data:
        data["dims"] = tuple(data["dims"])
    known = RunConfig.__dataclass_fields__
    return RunConfig(**{k: v for k, v in data.items() if k in known})


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    cfg = config_from_args(ns)
    try:
        text = COMMANDS[cfg.command](cfg)
        write_atomic(cfg.out, text)
    except (ConfigError, ValueError) as exc:
        code = EXIT_INPUT if isinstance(exc, InputError) else EXIT_CONFIG
        print(f"error: {exc}", file=sys.stderr)
        return code
    except (BudgetExceeded, RuntimeError, ArithmeticError) as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
