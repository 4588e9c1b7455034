"""Smoke test for the erms Python extension.

Build and install first:
    pip install maturin
    maturin develop -m crates/python/Cargo.toml
then run:
    python python/smoke_test.py
"""

import json

import erms


def close(a, b, tol):
    return all(abs(x - y) <= tol for x, y in zip(a, b))


def main():
    gas = erms.Scenario.gas_compressor()
    assert gas.levels == ["continue", "partial", "full-process", "esd"]
    assert len(gas.tests) >= 4
    assert erms.Scenario.from_json(gas.to_json()).to_json() == gas.to_json()

    prior = erms.diagnose(gas)["aggregate"]["probs"]
    assert close(prior, [0.90, 0.08, 0.02], 1e-12), prior

    desk = erms.Scenario.desk_alarm()
    post = erms.posterior(desk, "leak", {"alarm": "alarm"})["probs"]
    assert close(post, [0.375, 0.4667, 0.1583], 1e-4), post

    rec = erms.escalating_recommend(gas, prior)
    assert rec["ranked"][0]["level"] == rec["chosen"]
    free = erms.recommend(gas.with_ignition_loss(0.0), post, horizon=30.0)
    assert free["chosen"] == 0

    belief = erms.project(gas, [0.0, 0.8, 0.2, 0.0], 0, 10)
    assert abs(sum(belief) - 1.0) < 1e-12 and belief[3] > 0.0
    assert erms.classify_severity(gas, [0.90, 0.08, 0.02]) == "intermediate"
    assert erms.classify_severity(gas, [1.0, 0.0, 0.0], ignition_evident=True) == "high"

    constraints = dict(max_tests=1, max_total_time=45.0, max_total_cost=10000.0, expansion_budget=1)
    plan = erms.build_plan(gas, prior, constraints=constraints)
    assert plan["expansions_used"] == 1 and plan["best_eu"] >= plan["act_now_eu"]

    csv = erms.simulate(gas, [0.90, 0.08, 0.02, 0.0], steps=4, trajectories=2000, seed=1)
    assert csv.splitlines()[0] == "step,level,ignition_prob,mean_cost"

    session = erms.Session(gas)
    session.observe("ld_a", "alarm")
    session.advance(10.0)
    session.record_test("gas_sniffer_survey", "gas_detected")
    session.set_level(2)
    assert session.seq == 5 and session.clock == 10.0
    replayed = erms.Session.from_log(gas, session.log())
    assert replayed.state_json() == session.state_json()
    assert len(session.profile()) == 5
    assert session.recommendation()["chosen_name"] in gas.levels
    session.plan(constraints)

    try:
        session.observe("ghost", "x")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown node accepted")

    print(json.dumps({"ok": True, "diagnosis": session.diagnosis()["aggregate"]["probs"]}))


if __name__ == "__main__":
    main()
