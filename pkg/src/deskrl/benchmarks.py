"""Kernel backend benchmark: compiled core vs numpy fallback.

Times the three conv kernels through the policy network's layer stack at
rollout (batch 1) and update (batch 20/32) shapes, single-threaded, and
the end-to-end actor forward. Run with `deskrl bench`.
"""

from __future__ import annotations

import time

import numpy as np

from .kernels import backends


def _layer_stack(arch):
    (f1, f2, f3), (k1, k2, k3), (s1, s2, s3) = arch
    rng = np.random.default_rng(0)
    ws = [rng.standard_normal((k1, k1, 4, f1)).astype(np.float32) * 0.05,
          rng.standard_normal((k2, k2, f1, f2)).astype(np.float32) * 0.05,
          rng.standard_normal((k3, k3, f2, f3)).astype(np.float32) * 0.05]
    bs = [np.zeros(f, np.float32) for f in (f1, f2, f3)]
    return ws, bs, (s1, s2, s3)


def _time_pass(mod, arch, batch, iters, backward):
    ws, bs, strides = _layer_stack(arch)
    x = np.random.default_rng(1).random((batch, 88, 88, 4)).astype(np.float32)
    t0 = time.perf_counter()
    for _ in range(iters):
        acts = [x]
        for w, b, s in zip(ws, bs, strides):
            acts.append(np.maximum(mod.conv2d_fwd(acts[-1], w, b, s), 0))
        if backward:
            g = np.ones_like(acts[-1])
            for i in range(2, -1, -1):
                mod.conv2d_bwd_weights(acts[i], g, strides[i], ws[i].shape[0], ws[i].shape[1])
                if i:
                    g = mod.conv2d_bwd_input(g, ws[i], strides[i],
                                             acts[i].shape[1], acts[i].shape[2])
    return (time.perf_counter() - t0) / iters


def bench_kernels(iters: int = 30, arches=None):
    arches = arches or {
        "paper-size (16,32,32)": ((16, 32, 32), (8, 4, 3), (4, 2, 1)),
        "desk-size (8,16,16)": ((8, 16, 16), (8, 4, 3), (4, 2, 1)),
    }
    cases = [("fwd  B=1", 1, False), ("fwd  B=20", 20, False),
             ("fwd+bwd B=20", 20, True), ("fwd+bwd B=32", 32, True)]
    mods = backends()
    print(f"backends: {', '.join(mods)}   (times in ms/pass, {iters} iters)")
    for arch_name, arch in arches.items():
        print(f"\n{arch_name}")
        header = f"  {'case':14s}" + "".join(f"{n:>10s}" for n in mods)
        if len(mods) == 2:
            header += f"{'speedup':>10s}"
        print(header)
        for case, batch, backward in cases:
            times = {n: _time_pass(m, arch, batch, max(3, iters // (batch // 4 + 1)),
                                   backward) for n, m in mods.items()}
            row = f"  {case:14s}" + "".join(f"{t * 1e3:10.2f}" for t in times.values())
            if len(times) == 2:
                row += f"{times['numpy'] / times['cython']:10.2f}x"
            print(row)


if __name__ == "__main__":
    bench_kernels()
