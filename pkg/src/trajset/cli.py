"""Command-line entry point: ``trajset <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import resource
import sys
import time
from pathlib import Path

import numpy as np

from trajset import io, metrics, model, setgen, synth
from trajset.core import ClassGroup
from trajset.nms import DEFAULT_R_NMS

log = logging.getLogger("trajset")


def _emit(args, payload: dict, text: str) -> None:
    if args.json:
        print(json.dumps(payload, default=io._json_default))
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _group_path(out: Path, group: ClassGroup, suffix: str) -> Path:
    return out.with_name(f"{out.stem}.{group.value}{suffix}")


def _futures_for(ds, group: ClassGroup | None):
    if group in (None, ClassGroup.MIXED):
        return ds.futures()
    keep = [n for n, c in enumerate(ds.classes()) if c.group is group]
    if not keep:
        raise ValueError(f"dataset has no agents of group {group.value!r}")
    return ds.futures()[keep]


# --- subcommands ------------------------------------------------------------------

def cmd_synth(args) -> int:
    if args.kind == "interaction":
        ds = synth.make_interaction_dataset(args.scenarios, args.seed, args.t_past, args.t_future)
    else:
        prof = synth.Profile(n_vehicle=args.vehicles, n_pedestrian=args.pedestrians, n_cyclist=args.cyclists,
                             n_bus=args.buses, n_motorcyclist=args.motorcyclists,
                             t_past=args.t_past, t_future=args.t_future, seed=args.seed)
        ds = synth.make_dataset(prof)
    io.write_dataset(ds, args.out)
    _emit(args, {"out": str(args.out), "scenarios": len(ds)}, f"wrote {len(ds)} scenarios to {args.out}")
    return 0


def cmd_generate_set(args) -> int:
    ds = io.read_dataset(args.dataset)
    if args.subsample:
        ds = ds.subset(sorted(setgen.subsample(list(range(len(ds))), args.subsample, args.seed)))
    out = Path(args.out)
    meta = {"source": str(args.dataset), "seed": args.seed, "subsample": args.subsample}
    results = {}
    if args.class_specific:
        groups = [ClassGroup.NON_VULNERABLE, ClassGroup.VULNERABLE]
        jobs = [(g, _futures_for(ds, g), _group_path(out, g, out.suffix or ".json")) for g in groups]
    else:
        jobs = [(ClassGroup.MIXED, ds.futures(), out)]
    for group, data, path in jobs:
        t0 = time.perf_counter()
        if args.algorithm == "bagging":
            tset = setgen.generate_set_bagging(data, args.epsilon, dt=ds.dt, class_group=group)
            tset.meta.update(meta)
        else:
            tset, _ = setgen.generate_set_metric_driven(
                data, args.size, metric=args.metric, matrix_threshold=args.matrix_threshold,
                dt=ds.dt, class_group=group, meta=meta)
        elapsed = time.perf_counter() - t0
        io.write_set(tset, path)
        curve = path.with_suffix(".curve.csv")
        if args.algorithm == "metric":
            io.write_curve(tset, curve)
        final = tset.meta.get("achievable", [None])[-1] if args.algorithm == "metric" else None
        results[group.value] = {"out": str(path), "size": len(tset), "final_achievable": final,
                                "lb_minade": metrics.lb_minade(data, tset), "seconds": elapsed}
    lines = [f"{g}: {r['size']} trajectories -> {r['out']}  LB minADE {r['lb_minade']:.4f} m"
             + (f"  final achievable {r['final_achievable']:.6g}" if r["final_achievable"] is not None else "")
             for g, r in results.items()]
    _emit(args, results, "\n".join(lines))
    return 0


def cmd_eval_set(args) -> int:
    ds = io.read_dataset(args.dataset)
    rows = []
    for path in args.set:
        tset = io.read_set(path)
        data = _futures_for(ds, tset.class_group)
        rows.append({"set": str(path), "class_group": tset.class_group.value, "size": len(tset),
                     "lb_minade": metrics.lb_minade(data, tset), "n": int(data.shape[0])})
    text = "set\tgroup\tsize\tLB minADE\n" + "".join(
        f"{r['set']}\t{r['class_group']}\t{r['size']}\t{r['lb_minade']:.4f}\n" for r in rows)
    _emit(args, {"sets": rows}, text)
    return 0


def cmd_train(args) -> int:
    ds = io.read_dataset(args.dataset)
    bank = model.SetBank([io.read_set(p) for p in args.set])
    x, av, _, _ = model.training_arrays(ds, bank, args.conditional)
    net = model.build_model(x.shape[1], bank, conditional=args.conditional,
                            n_av_features=None if av is None else av.shape[1],
                            hidden=args.hidden, feature_size=args.feature_size, seed=args.seed)
    cfg = model.TrainConfig(schedule=[(args.lr[0], args.epochs[0]), (args.lr[1], args.epochs[1])],
                            batch_size=args.batch_size, seed=args.seed)
    curve = model.train(net, ds, bank, cfg)
    io.write_checkpoint(net, args.out, bank, extra={"loss_curve": curve, "dataset": str(args.dataset)})
    text = "epoch\tloss\n" + "".join(f"{n + 1}\t{v:.6f}\n" for n, v in enumerate(curve))
    _emit(args, {"out": str(args.out), "loss_curve": curve, "rcc": metrics.rcc(net)}, text)
    return 0


def cmd_predict(args) -> int:
    net, bank, _ = io.read_checkpoint(args.checkpoint)
    if bank is None:
        raise ValueError(f"{args.checkpoint}: checkpoint carries no trajectory set")
    ds = io.read_dataset(args.dataset)
    r_nms = 0.0 if args.no_nms else args.r_nms
    preds = model.predict_dataset(net, ds, bank, args.k, r_nms)
    origin = np.zeros((len(ds), 2))
    report = metrics.eval_multimodal([p.trajectories for p in preds], ds.futures(), args.k,
                                     classes=ds.classes(), last_observed=origin)
    if args.out_csv:
        with open(args.out_csv, "w") as fh:
            fh.write("scenario_id,rank,set_index,probability,timestep,x,y\n")
            for sc, p in zip(ds.scenarios, preds):
                for rank, (idx, prob, traj) in enumerate(zip(p.indices, p.probabilities, p.trajectories)):
                    for t, (x, y) in enumerate(traj):
                        fh.write(f"{sc.scenario_id},{rank},{idx},{io._f(prob)},{t},{io._f(x)},{io._f(y)}\n")
    if args.report:
        io.write_report(report, args.report)
    _emit(args, report.as_dict(), io.report_text(report.as_dict()))
    return 0


def cmd_report_rcc(args) -> int:
    net, _, _ = io.read_checkpoint(args.checkpoint)
    value = metrics.rcc(net)
    _emit(args, {"rcc": value, "parameters": net.n_parameters(), "conditional": net.conditional},
          f"RCC {value:.2f} %  ({net.n_parameters()} parameters)")
    return 0


def cmd_bench(args) -> int:
    ds = io.read_dataset(args.dataset)
    data = ds.futures()
    if args.k:
        data = setgen.subsample(data, args.k, args.seed)
    rows = []
    for s in args.sizes:
        t0 = time.perf_counter()
        tset, trace = setgen.generate_set_metric_driven(data, s, matrix_threshold=args.matrix_threshold)
        rows.append({"k": int(data.shape[0]), "s": s, "seconds": time.perf_counter() - t0,
                     "strategy": trace.memory_strategy, "evaluations": trace.evaluations,
                     "final_achievable": trace.achievable[-1],
                     "peak_rss_mb": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024})
    text = "k\ts\tseconds\tstrategy\tevaluations\tpeak_rss_mb\n" + "".join(
        f"{r['k']}\t{r['s']}\t{r['seconds']:.3f}\t{r['strategy']}\t{r['evaluations']}\t{r['peak_rss_mb']:.0f}\n"
        for r in rows)
    _emit(args, {"runs": rows}, text)
    return 0


# --- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true", help="machine-readable output")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="trajset", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic dataset")
    s.add_argument("--kind", choices=["benchmark", "interaction"], default="benchmark")
    s.add_argument("--vehicles", type=int, default=100)
    s.add_argument("--pedestrians", type=int, default=100)
    s.add_argument("--cyclists", type=int, default=0)
    s.add_argument("--buses", type=int, default=0)
    s.add_argument("--motorcyclists", type=int, default=0)
    s.add_argument("--scenarios", type=int, default=200, help="interaction scenarios")
    s.add_argument("--t-past", type=int, default=synth.DEFAULT_T_PAST)
    s.add_argument("--t-future", type=int, default=synth.DEFAULT_T_FUTURE)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", type=Path, required=True)
    s.set_defaults(func=cmd_synth)

    g = sub.add_parser("generate-set", parents=[common], help="build a trajectory set")
    g.add_argument("--dataset", type=Path, required=True)
    g.add_argument("--size", type=int, default=64)
    g.add_argument("--algorithm", choices=["metric", "bagging"], default="metric")
    g.add_argument("--metric", choices=list(setgen.PAIR_METRICS), default="ade")
    g.add_argument("--epsilon", type=float, default=2.0)
    g.add_argument("--class-specific", action="store_true")
    g.add_argument("--subsample", type=int, default=0)
    g.add_argument("--matrix-threshold", type=int, default=setgen.DEFAULT_MATRIX_THRESHOLD)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", type=Path, required=True)
    g.set_defaults(func=cmd_generate_set)

    e = sub.add_parser("eval-set", parents=[common], help="LB minADE of trajectory sets")
    e.add_argument("--dataset", type=Path, required=True)
    e.add_argument("--set", type=Path, nargs="+", required=True)
    e.set_defaults(func=cmd_eval_set)

    t = sub.add_parser("train", parents=[common], help="train a set classifier")
    t.add_argument("--dataset", type=Path, required=True)
    t.add_argument("--set", type=Path, nargs="+", required=True)
    t.add_argument("--conditional", action="store_true", help="late fusion of the AV plan")
    t.add_argument("--hidden", type=int, default=512)
    t.add_argument("--feature-size", type=int, default=128)
    t.add_argument("--epochs", type=int, nargs=2, default=[4, 4], metavar=("E1", "E2"))
    t.add_argument("--lr", type=float, nargs=2, default=[1e-3, 1e-4], metavar=("LR1", "LR2"))
    t.add_argument("--batch-size", type=int, default=32)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", type=Path, required=True)
    t.set_defaults(func=cmd_train)

    q = sub.add_parser("predict", parents=[common], help="predict and evaluate")
    q.add_argument("--checkpoint", type=Path, required=True)
    q.add_argument("--dataset", type=Path, required=True)
    q.add_argument("--k", type=int, default=6)
    q.add_argument("--r-nms", type=float, default=DEFAULT_R_NMS)
    q.add_argument("--no-nms", action="store_true")
    q.add_argument("--out-csv", type=Path)
    q.add_argument("--report", type=Path)
    q.set_defaults(func=cmd_predict)

    r = sub.add_parser("report-rcc", parents=[common], help="remaining conditional capacity")
    r.add_argument("--checkpoint", type=Path, required=True)
    r.set_defaults(func=cmd_report_rcc)

    b = sub.add_parser("bench", parents=[common], help="time set generation")
    b.add_argument("--dataset", type=Path, required=True)
    b.add_argument("--sizes", type=int, nargs="+", default=[10, 50, 100])
    b.add_argument("--k", type=int, default=0, help="subsample the dataset to k trajectories")
    b.add_argument("--matrix-threshold", type=int, default=setgen.DEFAULT_MATRIX_THRESHOLD)
    b.add_argument("--seed", type=int, default=0)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        print(f"trajset {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
