"""Builds the extension with cargo and exercises it end to end.

    python3 python/smoke_test.py
"""
import math
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build():
    cmd = ["cargo", "build", "--release", "-p", "laplacegnn-py"]
    if os.environ.get("CARGO_OFFLINE", "1") == "1":
        cmd.append("--offline")
    subprocess.run(cmd, cwd=ROOT, check=True)
    lib = {"darwin": "liblaplacegnn_py.dylib", "win32": "laplacegnn_py.dll"}.get(sys.platform, "liblaplacegnn_py.so")
    out = tempfile.mkdtemp(prefix="laplacegnn-py-")
    ext = "laplacegnn.pyd" if sys.platform == "win32" else "laplacegnn.so"
    shutil.copy(os.path.join(ROOT, "target", "release", lib), os.path.join(out, ext))
    sys.path.insert(0, out)
    return out


def main():
    out = build()
    import laplacegnn as lg

    # 4-cycle: normalized Laplacian spectrum is {0, 1, 1, 2}
    cycle = lg.Graph(4, [(0, 1), (1, 2), (2, 3), (3, 0)])
    eig = lg.extremal_eigenvalues(cycle.laplacian(), 2)
    assert all(abs(a - b) < 1e-9 for a, b in zip(eig, [0.0, 1.0, 1.0, 2.0])), eig
    c = cycle.centrality()
    assert len(c) == 4 and all(abs(v - c[0]) < 1e-12 for v in c)

    try:
        lg.Graph(3, [(0, 0)])
    except ValueError:
        pass
    else:
        raise AssertionError("self-loop accepted")

    g = lg.generate_sbm(60, p_in=0.3, p_out=0.02, d_feat=8, margin=2.0, seed=1)
    assert g.n_nodes == 60 and len(g.labels) == 60

    plan = lg.optimize_views(g, budget_ratio=0.2, iterations=5, k=4, seed=3)
    assert len(plan.history_max) == 5
    assert sum(v for _, _, v in plan.delta_max()) <= plan.budget + 1e-9
    v1, v2 = plan.sample_views(7)
    assert v1 == plan.sample_views(7)[0] and len(v2) == 60

    path = os.path.join(out, "plan.txt")
    plan.save(path)
    again = lg.load_plan(g, path)
    assert again.delta_max() == plan.delta_max()

    trainer = lg.Trainer(plan, g, hidden=[16, 8], proj_hidden=16, lr=1e-2, seed=0)
    losses = trainer.train(5)
    assert len(losses) == 5 and all(math.isfinite(x) for x in losses)
    emb = trainer.embed()
    assert len(emb) == 60 and len(emb[0]) == 8
    ckpt = os.path.join(out, "ckpt.bin")
    trainer.save(ckpt)
    other = lg.Trainer(plan, g, hidden=[16, 8], proj_hidden=16, lr=1e-2, seed=9)
    other.load(ckpt)
    assert other.epoch == 5 and other.embed() == emb

    acc, std = lg.linear_probe(emb, g.labels, train_frac=0.3, seeds=3)
    assert 0.0 <= acc <= 1.0 and std >= 0.0

    assert abs(lg.boot_loss([[1.0, 0.0]], [[2.0, 0.0]]) + 2.0) < 1e-12
    attacked = lg.random_attack(g, 0.2, seed=1)
    assert attacked.n_nodes == 60 and attacked.edges != g.edges
    lg.dice_attack(g, 0.2, seed=1)

    print(f"ok: loss {losses[0]:.4f} -> {losses[-1]:.4f}, probe accuracy {acc:.3f}")


if __name__ == "__main__":
    main()
