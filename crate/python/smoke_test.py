#!/usr/bin/env python3
"""End-to-end exercise of the corescope_py extension module.

Build the module first, then run this script:

    cargo build -p corescope-py --features extension-module
    python3 python/smoke_test.py
"""
import json
import pathlib
import shutil
import sys

HERE = pathlib.Path(__file__).resolve().parent
REPO = HERE.parent


def ensure_module() -> None:
    target = HERE / "corescope_py.so"
    if not target.exists():
        for profile in ("release", "debug"):
            built = REPO / "target" / profile / "libcorescope_py.so"
            if built.exists():
                shutil.copy2(built, target)
                break
        else:
            sys.exit("build the extension first: "
                     "cargo build -p corescope-py --features extension-module")
    sys.path.insert(0, str(HERE))


def main() -> None:
    ensure_module()
    import corescope_py as cs

    infra = cs.generate_infrastructure(
        width=30, height=30, max_num_cities=3, number_of_agents=4,
        seed=99, speeds=[(1, 1.0)])
    assert infra.num_cities >= 2 and infra.num_trains == 4, repr(infra)
    assert infra.render_svg().startswith("<svg")
    roundtrip = cs.Infrastructure.from_json(infra.to_json())
    assert roundtrip.num_trains == infra.num_trains

    schedule = cs.generate_schedule(infra, seed=7)
    assert schedule.verify(infra) == [], "generated schedule must be conflict-free"

    malfunction = cs.malfunction_for_train(
        schedule, train=2, earliest_malfunction=5, duration=10)
    assert malfunction.train == 2 and malfunction.duration == 10

    problem = cs.build_problem(infra, schedule, malfunction, k=5, max_window=30)
    full = cs.solve(problem, seed=0)
    assert full.proved_optimal, repr(full)

    core = cs.changed_trains(schedule, full)
    for name, directive in [
        ("online_unrestricted", cs.scope_online_unrestricted(schedule, malfunction)),
        ("upper_bound", cs.scope_upper_bound(schedule, full)),
        ("max_speedup", cs.scope_max_speedup(schedule, full)),
        ("baseline", cs.scope_baseline(schedule, full)),
        ("heuristic", cs.scope_heuristic(schedule, malfunction, infra)),
        ("random", cs.scope_random(schedule, malfunction, n=2, seed=4)),
    ]:
        restricted = cs.apply_scope(problem, directive)
        scoped = cs.solve(restricted, seed=0)
        print(f"{name:20s} predicted={directive.predicted_changed} "
              f"cost={scoped.cost} nodes={scoped.nodes_expanded}")
        if name in ("upper_bound", "max_speedup", "baseline"):
            assert scoped.cost == full.cost, (name, scoped.cost, full.cost)

    tp, fp, fn, f1 = cs.prediction_quality([0, 1, 2, 3], core)
    assert tp + fn == len(core) and 0.0 <= f1 <= 1.0
    assert cs.speedup(100.0, 50.0) == 2.0

    config = json.loads(cs.desk_config_json())
    config.update(agenda_id="smoke", width=30, height=30, flatland_seed_value=99,
                  max_num_cities=3, number_of_agents=4, speed_data=[[1, 1.0]],
                  schedule_id=[0, 1, 1], malfunction_train_id=[0, 2, 2],
                  earliest_malfunction=5, malfunction_duration=10)
    store = REPO / "target" / "py_smoke_store"
    shutil.rmtree(store, ignore_errors=True)
    summary = json.loads(cs.run_agenda(json.dumps(config), str(store), workers=2))
    assert summary["executed"] == 2, summary
    report = json.loads(cs.analyze_agenda(str(store), "smoke", bins=4))
    assert report["analyzed"] + report["inapplicable"] == 2, report
    assert (store / "runs" / "smoke" / "analysis" / "metrics.csv").exists()

    print("smoke test passed")


if __name__ == "__main__":
    main()
