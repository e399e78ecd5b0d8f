"""Command-line entry point.

Subcommands: pretrain, train, collect, eval, report, gradcheck, replay,
fixtures, bench. Training configs are JSON files with flag overrides;
DESKRL_RUNS picks the run-root directory.
"""

import argparse
import json
import logging
import os
import sys

# pin BLAS before numpy loads; actor threads provide the parallelism
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")


def _seeds(text):
    return [int(s) for s in text.split(",") if s]


def build_parser():
    p = argparse.ArgumentParser(prog="deskrl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="run a training experiment")
    tr.add_argument("--config", help="JSON experiment config")
    tr.add_argument("--name")
    tr.add_argument("--env", dest="env_id")
    tr.add_argument("--variant", choices=["a3c", "a3ctb", "a3c_sil", "a3ctb_sil"])
    tr.add_argument("--pretrain", dest="pretrain_mode",
                    choices=["sl", "sl_v", "sl_v_ae", "ae"])
    tr.add_argument("--transfer", choices=["full", "no_fc"])
    tr.add_argument("--archive", dest="demo_archive")
    tr.add_argument("--seeds", type=_seeds)
    tr.add_argument("--t-max", dest="T_max", type=int)
    tr.add_argument("--eval-every", dest="eval_every", type=int)
    tr.add_argument("--eval-episodes", dest="eval_episodes", type=int)
    tr.add_argument("--k", type=int)
    tr.add_argument("--strict", action="store_true", default=None)
    tr.add_argument("--run-root")

    pt = sub.add_parser("pretrain", help="pre-train on a demo archive")
    pt.add_argument("--archive", required=True)
    pt.add_argument("--mode", required=True, choices=["sl", "sl_v", "sl_v_ae", "ae"])
    pt.add_argument("--out", required=True)
    pt.add_argument("--updates", type=int, default=50_000)
    pt.add_argument("--batch", type=int, default=32)
    pt.add_argument("--holdout", type=float, default=0.2)
    pt.add_argument("--seed", type=int, default=1)

    ev = sub.add_parser("eval", help="evaluate a checkpoint")
    ev.add_argument("--checkpoint", required=True)
    ev.add_argument("--env", required=True)
    ev.add_argument("--episodes", type=int, default=10)
    ev.add_argument("--seed", type=int, default=1)

    co = sub.add_parser("collect", help="serve live demonstration collection")
    co.add_argument("--env", default="minipacman")
    co.add_argument("--seed", type=int, default=1)
    co.add_argument("--port", type=int, default=8700)
    co.add_argument("--host", default="127.0.0.1")
    co.add_argument("--archive", required=True)
    co.add_argument("--assets", default=None,
                    help="static asset dir (default: frontend/dist when present)")
    co.add_argument("--tick-hz", type=float, default=15.0)

    rp = sub.add_parser("report", help="plot curves and summarize runs")
    rp.add_argument("runs", nargs="+")
    rp.add_argument("--out", default="report")
    rp.add_argument("--threshold", type=float, default=None,
                    help="override the committed score threshold")

    gc = sub.add_parser("gradcheck", help="finite-difference gradient battery")
    gc.add_argument("--seeds", type=int, default=20)
    gc.add_argument("--tolerance", type=float, default=1e-4)

    re = sub.add_parser("replay", help="replay an archived episode through the env")
    re.add_argument("--archive", required=True)
    re.add_argument("--episode", type=int, default=None,
                    help="episode index (default: all)")

    fx = sub.add_parser("fixtures", help="(re)generate scripted demo fixtures")
    fx.add_argument("--root", default=None)

    be = sub.add_parser("bench", help="kernel backend benchmark")
    be.add_argument("--iters", type=int, default=30)
    return p


def cmd_train(args):
    from .harness.config import ExperimentConfig
    from .harness.run import run_experiment

    base = {}
    if args.config:
        base = json.loads(open(args.config).read())
    overrides = {k: v for k, v in vars(args).items()
                 if k in ExperimentConfig.__dataclass_fields__ and v is not None}
    cfg = ExperimentConfig.from_dict({**base, **overrides})
    run_dir = run_experiment(cfg, args.run_root)
    print(run_dir)
    return 0


def cmd_pretrain(args):
    from .demos import load_demo_archive
    from .harness.config import ExperimentConfig
    from .pretrain import (PretrainConfig, build_pretrain_dataset,
                           run_pretraining, save_pretrained)

    archive = load_demo_archive(args.archive)
    defaults = ExperimentConfig(name="pretrain", env_id=archive.env_id)
    cfg = PretrainConfig(mode=args.mode, updates=args.updates, batch=args.batch,
                         holdout_fraction=args.holdout)
    net_cfg = defaults.net_config(len(archive.actions), decoder=cfg.has_ae)
    train, hold = build_pretrain_dataset(archive, cfg.gamma, cfg.tb_epsilon,
                                         cfg.holdout_fraction, args.seed)
    blocks, trace = run_pretraining(train, hold, net_cfg, cfg, args.seed)
    save_pretrained(args.out, blocks, net_cfg, cfg, archive.env_id)
    print(json.dumps(trace[-1]))
    return 0


def cmd_eval(args):
    from .autodiff import load_checkpoint
    from .a3c import evaluate_policy
    from .nets import NetConfig, PolicyValueNet

    blocks, manifest = load_checkpoint(args.checkpoint)
    meta = manifest.get("meta", {})
    net_meta = meta.get("net")
    if net_meta:
        net_cfg = NetConfig(
            n_actions=net_meta["n_actions"], conv_filters=tuple(net_meta["conv_filters"]),
            conv_kernels=tuple(net_meta["conv_kernels"]),
            conv_strides=tuple(net_meta["conv_strides"]), fc1=net_meta["fc1"],
            decoder=net_meta.get("decoder", False))
    else:
        from .envs import env_spec
        from .harness.config import ExperimentConfig

        spec = env_spec(args.env)
        net_cfg = ExperimentConfig(name="eval", env_id=args.env).net_config(spec.n_actions)
    mean, scores = evaluate_policy(PolicyValueNet(net_cfg), blocks, args.env,
                                   args.episodes, args.seed)
    print(json.dumps({"mean": mean, "scores": scores}))
    return 0


def cmd_collect(args):
    import pathlib

    from .demo_server import serve

    assets = args.assets
    if assets is None and pathlib.Path("frontend/dist").is_dir():
        assets = "frontend/dist"
    server = serve(args.env, args.seed, args.archive, host=args.host, port=args.port,
                   asset_dir=assets, tick_hz=args.tick_hz)
    print(f"demo server on http://{args.host}:{server.port} "
          f"(ws endpoint /ws, archive {args.archive})", flush=True)
    try:
        while True:
            import time

            time.sleep(1)
    except KeyboardInterrupt:
        server.shutdown()
    return 0


def cmd_report(args):
    from .fixtures import threshold as frozen_threshold
    from .harness.report import emit_report, load_run

    thr = args.threshold
    if thr is None:
        try:
            thr = frozen_threshold(load_run(args.runs[0])["env"])
        except KeyError:
            thr = None
    svg, summary = emit_report(args.runs, args.out, threshold=thr)
    print(summary.read_text())
    print(svg)
    return 0


def cmd_gradcheck(args):
    from .gradsuite import run_battery

    def progress(name, seed, report):
        mark = "ok" if report.passed else "FAIL"
        print(f"{name:18s} seed {seed:3d}  max_rel={report.max_rel_error:.2e}  {mark}")

    ok, results = run_battery(seeds=args.seeds, tolerance=args.tolerance,
                              progress=progress)
    print(f"{'PASS' if ok else 'FAIL'}: {len(results)} checks")
    return 0 if ok else 1


def cmd_replay(args):
    import numpy as np

    from .demos import load_demo_archive, replay_episode

    archive = load_demo_archive(args.archive)
    indices = range(len(archive.episodes)) if args.episode is None else [args.episode]
    bad = 0
    for i in indices:
        rewards, score = replay_episode(archive, i)
        stored = archive.episodes[i]
        match = np.array_equal(rewards, stored.rewards) and score == stored.score
        bad += not match
        print(f"episode {i}: {stored.steps} steps, score {score}, "
              f"{'bit-exact' if match else 'MISMATCH'}")
    return 1 if bad else 0


def cmd_fixtures(args):
    from .fixtures import ensure_fixture, spec

    for env_id in spec():
        path = ensure_fixture(env_id, args.root)
        print(f"{env_id}: {path}")
    return 0


def cmd_bench(args):
    from .benchmarks import bench_kernels

    bench_kernels(iters=args.iters)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    handler = {
        "train": cmd_train, "pretrain": cmd_pretrain, "eval": cmd_eval,
        "collect": cmd_collect, "report": cmd_report, "gradcheck": cmd_gradcheck,
        "replay": cmd_replay, "fixtures": cmd_fixtures, "bench": cmd_bench,
    }[args.command]
    return handler(args)


if __name__ == "__main__":
    sys.exit(main())
