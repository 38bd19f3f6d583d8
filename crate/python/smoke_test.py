"""Smoke test for the pmfuse_py extension.

Imports an installed module when available (e.g. after `maturin develop`),
otherwise loads the library built by `cargo build -p pmfuse-python`.
"""

import importlib.machinery
import importlib.util
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load():
    try:
        import pmfuse_py

        return pmfuse_py
    except ImportError:
        pass
    for profile in ("release", "debug"):
        for name in ("libpmfuse_py.so", "libpmfuse_py.dylib", "pmfuse_py.dll"):
            path = ROOT / "target" / profile / name
            if path.exists():
                loader = importlib.machinery.ExtensionFileLoader("pmfuse_py", str(path))
                spec = importlib.util.spec_from_file_location("pmfuse_py", path, loader=loader)
                module = importlib.util.module_from_spec(spec)
                loader.exec_module(module)
                return module
    sys.exit("pmfuse_py not found; run `cargo build -p pmfuse-python` first")


def main():
    pm = load()

    cfg = pm.Config()
    assert len(cfg.scenarios) == 5, cfg.scenarios
    assert len(cfg.hash) == 64

    # s = (g / 5280) * q_hr / o
    v = pm.loop_speed(22.0, 20.0, 0.1)
    assert abs(v - 22.0 / 5280.0 * 1200.0 / 0.1) < 1e-9, v

    parts = pm.distribute_link_tt(120.0, [1.0, 3.0], [0.5, 0.5])
    assert parts == [30.0, 90.0], parts

    flow = [[1000.0] * 5, [2000.0] * 5]
    speed = [[60.0] * 5, [60.0] * 5]
    out = pm.smooth([0.0, 1.0], flow, speed, [0.5], quantity="flow", method="gasm")
    assert abs(out[0][2] - 1500.0) < 1e-9, out

    truth = pm.Totals(100.0, 10.0, 5.0)
    imp = pm.improvement(pm.Totals(99.0, 9.0, 4.0), pm.Totals(100.0, 9.8, 4.9), truth)
    assert abs(imp[2] - 18.0) < 1e-9, imp

    small = pm.Config(
        """
        [scenarios]
        run = ["night_offpeak"]
        [scenarios.night_offpeak]
        duration = "10 min"
        """
    )
    r = small.seeds("night_offpeak")
    res = pm.run(small, "night_offpeak", r[0])
    t = res.totals("ground_truth")
    h = res.totals("hybrid")
    assert t.vmt > 0 and abs(h.vmt - t.vmt) / t.vmt < 0.02, (t, h)
    print("smoke test ok:", res.scenario, t, h)


if __name__ == "__main__":
    main()
