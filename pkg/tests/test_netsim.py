from __future__ import annotations

import dataclasses
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ransomnet.detector import DetectionVerdict, Verdict
from ransomnet.fsmodel import WorkloadClass, WorkloadSpec
from ransomnet.messages import MessageKind
from ransomnet.netsim import (
    ConfigError,
    Node,
    PromptAnswer,
    ScenarioConfig,
    UserPolicy,
    build_topology,
    load_scenario,
    parse_scenario,
    run,
    user_prompt,
    write_message_log,
)

QUIET = ScenarioConfig(benign_activity=False)
ANOMALOUS = DetectionVerdict(Verdict.ANOMALOUS, True, None, True, 742.0, True, "/x", 1.0)


def scenario(**kw) -> ScenarioConfig:
    return dataclasses.replace(QUIET, **kw)


# --- whole runs -----------------------------------------------------------------------

def test_all_idle_is_silent():
    result = run(scenario(nodes=100, infected=0, mechanism="all"), 1)
    assert result.messages == []
    assert not any(n.dr_anomalous or n.verdicts for n in result.nodes)


def test_single_infected_direct_report():
    result = run(scenario(infected=1, mechanism="dr", seed=3), 3)
    (bad,) = [n for n in result.nodes if n.infected]
    assert bad.dr_anomalous and bad.escalated_at is not None
    assert sum(n.dr_anomalous for n in result.nodes) == 1
    assert result.messages == []


def test_eighty_infected_broadcast_reports_eighty_percent():
    result = run(scenario(infected=80, mechanism="bm", seed=5), 5)
    reporters = [n for n in result.nodes if n.bm_report is not None]
    assert len(reporters) == 80
    for n in reporters:
        assert n.bm_report.message_text.startswith("80% machines in LAN")
    assert len(result.messages) == 80 * 99


def test_full_infection_acom_alerts_everyone():
    result = run(scenario(infected=100, mechanism="acom", seed=2), 2)
    assert all(n.acom_report is not None and n.acom_report.alert for n in result.nodes)
    assert all(h <= 20 for h in result.ant_hops)


def test_safe_stop_costs_a_detection_pass():
    cfg = scenario(nodes=2, infected=1, mechanism="acom", seed=0)
    result = run(cfg, 0)
    kinds = [m.kind for m in result.messages]
    assert kinds == [MessageKind.ANT_TRANSFER, MessageKind.ANT_RETURN]
    out, back = result.messages
    assert back.send_time == pytest.approx(out.deliver_time + cfg.acom.detection_pass_seconds)
    (home,) = [n for n in result.nodes if n.infected]
    assert not home.acom_report.alert and home.acom_report.inquired == 1
    assert home.acom_report_at - home.escalated_at == pytest.approx(
        2 * cfg.per_hop_delay + cfg.acom.detection_pass_seconds)


def test_suspended_node_still_answers_ants():
    result = run(scenario(nodes=10, infected=10, mechanism="acom", seed=4), 4)
    assert result.messages
    assert all(n.acom_report.alert for n in result.nodes)


def test_legitimate_ack_resumes_benign_encryption():
    cfg = scenario(nodes=5, infected=0, false_positives=1, fp_start_max=1.0,
                   user_policy="legitimate_ack", mechanism="all")
    result = run(cfg, 0)
    (fp,) = [n for n in result.nodes if n.workload == "benign_encrypt"]
    assert fp.dr_anomalous
    assert fp.escalated_at is None
    assert fp.files_encrypted == cfg.benign_encrypt_files
    assert result.messages == []


def test_always_escalate_freezes_false_positive():
    cfg = scenario(nodes=5, infected=0, false_positives=1, fp_start_max=1.0, mechanism="acom")
    result = run(cfg, 0)
    (fp,) = [n for n in result.nodes if n.workload == "benign_encrypt"]
    assert fp.escalated_at is not None
    assert fp.files_encrypted == fp.files_at_suspension < cfg.benign_encrypt_files
    assert not fp.acom_report.alert


def test_ground_truth_policy_releases_false_positive():
    cfg = scenario(nodes=5, infected=1, false_positives=1, fp_start_max=1.0,
                   user_policy="ground_truth", mechanism="bm")
    result = run(cfg, 0)
    (fp,) = [n for n in result.nodes if n.workload == "benign_encrypt"]
    (bad,) = [n for n in result.nodes if n.infected]
    assert fp.escalated_at is None and fp.files_encrypted == cfg.benign_encrypt_files
    assert bad.escalated_at is not None and bad.files_encrypted == bad.files_at_suspension
    assert len(result.messages) == 4


def test_unreachable_peers_rejected_for_ants():
    with pytest.raises(ConfigError):
        run(scenario(nodes=5, infected=1, mechanism="acom", topology="random_k", topology_k=0), 0)


def test_message_log_export(tmp_path):
    result = run(scenario(nodes=3, infected=1, mechanism="bm"), 0)
    path = tmp_path / "m.tsv"
    write_message_log(result.messages, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 2
    send, deliver, kind, src, dst = lines[0].split("\t")
    assert kind == "bm_announce" and float(deliver) - float(send) == pytest.approx(0.01)


@settings(max_examples=15, deadline=None)
@given(nodes=st.integers(2, 30), data=st.data(),
       mechanism=st.sampled_from(["dr", "acom", "bm", "all"]),
       policy=st.sampled_from([p.value for p in UserPolicy]))
def test_run_invariants(nodes, data, mechanism, policy):
    infected = data.draw(st.integers(0, nodes))
    fps = data.draw(st.integers(0, nodes - infected))
    cfg = ScenarioConfig(nodes=nodes, infected=infected, false_positives=fps, mechanism=mechanism,
                         user_policy=policy, seed=data.draw(st.integers(0, 999)),
                         horizon_seconds=90.0)
    seed = data.draw(st.integers(0, 999))
    result = run(cfg, seed)
    # determinism
    assert run(cfg, seed).to_text() == result.to_text()
    # causality and conservation
    sends = [m.send_time for m in result.messages]
    assert sends == sorted(sends)
    assert all(m.deliver_time > m.send_time for m in result.messages)
    assert result.delivered == len(result.messages)
    for n in result.nodes:
        # loss halts once a node is frozen, unless the user released it
        if n.infected and n.files_at_suspension is not None and policy != "legitimate_ack":
            assert n.files_encrypted == n.files_at_suspension
        if n.infected:
            assert n.dr_anomalous
        assert (n.escalated_at is None) or n.dr_anomalous
    escalated = sum(n.escalated_at is not None for n in result.nodes)
    if mechanism in ("bm", "all") and policy == "always_escalate":
        bm_msgs = sum(m.kind is MessageKind.BM_ANNOUNCE for m in result.messages)
        assert bm_msgs == escalated * (nodes - 1)
    assert all(h <= cfg.acom.limit_N for h in result.ant_hops)


# --- user prompt -----------------------------------------------------------------------

def node(policy, infected=False, kind=WorkloadClass.RANSOMWARE):
    return Node(0, (1,), ground_truth_infected=infected,
                workload=WorkloadSpec(kind), user_policy=UserPolicy(policy))


def test_prompt_policies():
    assert user_prompt(node("ground_truth", infected=True), ANOMALOUS) is PromptAnswer.ESCALATE
    assert user_prompt(node("ground_truth"), ANOMALOUS) is PromptAnswer.LEGITIMATE
    fp = node("legitimate_ack", kind=WorkloadClass.BENIGN_ENCRYPT)
    assert user_prompt(fp, ANOMALOUS) is PromptAnswer.LEGITIMATE
    assert user_prompt(node("legitimate_ack", True), ANOMALOUS) is PromptAnswer.ESCALATE
    safe_fp = node("always_escalate", kind=WorkloadClass.BENIGN_ENCRYPT)
    assert user_prompt(safe_fp, ANOMALOUS) is PromptAnswer.ESCALATE


def test_prompt_requires_anomalous_verdict():
    with pytest.raises(ValueError):
        user_prompt(node("always_escalate"), DetectionVerdict(Verdict.SAFE))


# --- topology ----------------------------------------------------------------------------

def test_complete_topology():
    topo = build_topology(100)
    assert all(len(p) == 99 and i not in p for i, p in topo.peers.items())


@given(st.integers(2, 120), st.integers(1, 10), st.integers(0, 1000))
def test_random_k_topology_symmetric(n, k, seed):
    topo = build_topology(n, "random_k", k, random.Random(seed))
    for i, peers in topo.peers.items():
        assert peers and i not in peers
        for j in peers:
            assert i in topo.peers[j]


# --- scenario files --------------------------------------------------------------------------

def test_parse_scenario_with_nested_keys(tmp_path):
    path = tmp_path / "s.cfg"
    path.write_text(
        "# comment\n"
        "nodes = 40\ninfected: 4\nmechanism = acom\n"
        "acom.threshold_T = 4\nacom.limit_N = 10\nbm.window_seconds = 1.5\n"
        "benign_activity = no\nfrequency.min_ops = 50\n"
    )
    cfg = load_scenario(path)
    assert (cfg.nodes, cfg.infected, cfg.mechanism) == (40, 4, "acom")
    assert (cfg.acom.threshold_T, cfg.acom.limit_N) == (4, 10)
    assert cfg.bm.window_seconds == 1.5
    assert cfg.benign_activity is False
    assert cfg.frequency.min_ops == 50


@pytest.mark.parametrize("text", [
    "bogus = 1", "acom.bogus = 1", "nodes = many", "nodes = 5\ninfected = 9",
    "mechanism = gossip", "justtext", "acom.limit_N = 0", "benign_activity = maybe",
])
def test_parse_scenario_errors(text):
    with pytest.raises((ConfigError, ValueError)):
        parse_scenario(text)


def test_missing_scenario_file():
    with pytest.raises(ConfigError, match="cannot read"):
        load_scenario("/nonexistent/scenario.cfg")
