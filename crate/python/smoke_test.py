"""Smoke test for the frost_hollow extension module.

Build and install first, e.g. `maturin develop -m crates/py/Cargo.toml`.
"""

import tempfile
from pathlib import Path

import frost_hollow as fh


def main() -> None:
    cfg = fh.ExperimentConfig("sessions = 1\n[sim]\ntrial_len = 60.0\n")
    assert len(cfg.hash()) == 16

    segs = fh.schedule("fixed", 1, cfg)
    # A fixed schedule repeats one interval drawn from [12, 22] s.
    assert len({s["inactive"] for s in segs}) == 1 and 12.0 <= segs[0]["inactive"] <= 22.0
    assert fh.schedule("random", 1, cfg) == fh.schedule("random", 1, cfg)

    agent = fh.Agent("tct")
    pred, signal = agent.tick(False, False)
    assert pred == 0.0 and not signal

    log = fh.run_trial("fixed", "tct", 3, cfg)
    log.validate()
    assert len(log) == 7500
    assert log == fh.replay(log, cfg)
    perf = log.performance(cfg)
    assert 0.0 <= perf["points_norm"] <= 1.0
    metrics = log.pulse_metrics(cfg)
    assert [m["index"] for m in metrics] == list(range(len(log.pulses)))

    session = fh.Session(cfg, condition="random", agent_kind="bc", seed=9, trial_len=4.0)
    assert session.initial_frame["step"] == 0
    session.submit_input(1, move_to=(0.5, 0.0))
    summary = None
    while summary is None:
        frame, summary = session.tick()
    assert frame["trial_over"] and frame["step"] == 500
    live = session.end()
    assert live == fh.replay(live, cfg)

    logs = fh.run_experiment(cfg, "fixed:none,drifting:tct")
    with tempfile.TemporaryDirectory() as d:
        files = fh.export_run(logs, d, cfg)
        assert len(files) == len(logs) + 3
        back = fh.read_trial_log(next(Path(d, "logs").iterdir()))
        assert back in logs

    print(f"smoke test ok: {len(logs)} grid trials, pulse leads "
          f"{[round(m['signal_to_hazard'] or 0, 2) for m in metrics[-3:]]}")


if __name__ == "__main__":
    main()
