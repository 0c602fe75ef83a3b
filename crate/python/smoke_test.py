"""Smoke test for the qvault extension module.

Build and install first:

    pip install --no-build-isolation ./crates/py
    python python/smoke_test.py
"""

import math

import qvault


def check_subspaces():
    a = qvault.Subspace.random(6, 3, seed=1)
    dual = a.dual()
    assert len(a) * len(dual) == 2**6
    assert dual.dual() == a
    for x in a.elements():
        for y in dual.elements():
            assert bin(x & y).count("1") % 2 == 0


def check_money():
    bank = qvault.Bank(qubits=8, seed=7)
    note = bank.mint(25)
    assert bank.active_value == 25
    assert all(bank.verify(note) for _ in range(5))
    cert = bank.certify(note)
    assert note.spent and bank.live_states == 0
    valid, reason = bank.check(cert)
    if valid:
        assert bank.redeem(cert) == 25
        assert bank.status(cert.serial) == "destroyed"
    else:
        assert reason in ("not-in-dual", "zero-witness"), reason
    assert bank.check(cert)[0] is False
    try:
        bank.certify(note)
    except ValueError:
        pass
    else:
        raise AssertionError("spent note was certified twice")


def check_attacks():
    assert math.isclose(qvault.exact_success("fabricate", 1), 0.5, abs_tol=1e-9)
    assert math.isclose(qvault.exact_success("random-basis", 2), 0.390625, abs_tol=1e-9)
    out = qvault.optimize_cloner()
    assert abs(out["achieved"] - 0.75) < 5e-4 and out["choi_valid"]
    report = qvault.counterfeit_experiment("optimal", qubits=1, trials=20_000, seed=3)
    assert abs(report["estimated_rate"] - 0.75) <= 5 * report["stderr"]


def check_network():
    for name in qvault.SCENARIOS:
        config, script = qvault.named_scenario(name, seed=11)
        transcript = qvault.run_scenario(config, script)
        assert transcript.violations() == [], (name, transcript.violations())
        again = qvault.Transcript.from_jsonl(transcript.to_jsonl())
        assert again.audit() == transcript.audit()
    config, script = qvault.named_scenario("double-spend")
    outcomes = [r["outcome"] for r in qvault.run_scenario(config, script).receipts()]
    assert outcomes[-1] == "error:not-in-custody", outcomes


def main():
    check_subspaces()
    check_money()
    check_attacks()
    check_network()
    print("qvault smoke test passed")


if __name__ == "__main__":
    main()
