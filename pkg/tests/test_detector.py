from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ransomnet.detector import (
    DetectionVerdict,
    DetectorConfig,
    EntropyThresholds,
    FrequencyConfig,
    InsufficientDataError,
    LocalDetector,
    PatternState,
    Verdict,
    check_entropy,
    compute_frequency,
    local_detect,
    observe_event,
)
from ransomnet.fsmodel import (
    EventKind,
    FileCategory,
    FileModel,
    FsEvent,
    WorkloadClass,
    WorkloadSpec,
    compute_entropy,
    gen_trace,
    iter_trace,
)

O, C, R, W, X, D = (EventKind.OPEN, EventKind.CREATE, EventKind.READ,
                    EventKind.WRITE, EventKind.CLOSE, EventKind.DELETE)
TH = EntropyThresholds()


def feed(kinds, path="/f"):
    state = PatternState()
    matches = []
    for i, k in enumerate(kinds):
        state, m = observe_event(state, FsEvent(i * 0.01, k, path))
        matches.append(m)
    return state, matches


def histogram_near(target: float) -> tuple[int, ...]:
    """Histogram over k symbols (j of them doubled) whose entropy is closest to ``target``."""
    best = None
    for k in range(1, 257):
        for j in range(0, k + 1, max(1, k // 64)):
            h = [2] * j + [1] * (k - j) + [0] * (256 - k)
            e = compute_entropy(h)
            if best is None or abs(e - target) < abs(best[0] - target):
                best = (e, h)
    return tuple(best[1])


def model(ext, category, histogram):
    return FileModel(f"/f.{ext}", ext, category, sum(histogram), histogram=histogram)


# --- pattern automaton ----------------------------------------------------------

def test_encrypt_sequence_matches_on_write():
    _, m = feed([O, C, O, R, W])
    assert m == [None, None, None, None, "/f"]


def test_modify_sequence_does_not_match():
    _, m = feed([O, R, X, O, C, O, X, W])
    assert m[-1] is None


def test_read_read_write_does_not_match():
    _, m = feed([R, R, W])
    assert m[-1] is None


def test_single_prior_entry_does_not_match():
    _, m = feed([R, W])
    assert m[-1] is None


def test_write_then_read_write_does_not_match():
    _, m = feed([O, W, R, W])
    assert m == [None] * 4


def test_out_of_order_events_rejected():
    state = PatternState()
    observe_event(state, FsEvent(1.0, R, "/a"))
    with pytest.raises(ValueError):
        observe_event(state, FsEvent(0.5, R, "/a"))


@given(st.lists(st.sampled_from(list(EventKind)), max_size=60))
def test_pattern_state_invariants(kinds):
    state = PatternState()
    for i, k in enumerate(kinds):
        before = list(state.event_list)
        state, m = observe_event(state, FsEvent(i * 0.5, k, "/p"))
        if k is W:
            assert state.event_list == []
            expected = len(before) >= 2 and before[-1] is R and before[-2] not in (R, W)
            assert (m is not None) == expected
        else:
            assert m is None
            assert state.event_list[-1] is k
    rw = [i * 0.5 for i, k in enumerate(kinds) if k in (R, W)]
    assert state.time_list == rw


@pytest.mark.parametrize("kind", [WorkloadClass.MODIFY, WorkloadClass.COMPRESS,
                                  WorkloadClass.DECOMPRESS, WorkloadClass.BROWSE])
@given(seed=st.integers(0, 2**32), files=st.integers(1, 25))
@settings(max_examples=25)
def test_benign_shapes_never_match(kind, seed, files):
    state = PatternState()
    for e in gen_trace(WorkloadSpec(kind, 200, files), seed).events:
        state, m = observe_event(state, e)
        assert m is None


@given(seed=st.integers(0, 2**32), files=st.integers(1, 25),
       kind=st.sampled_from([WorkloadClass.RANSOMWARE, WorkloadClass.BENIGN_ENCRYPT]))
@settings(max_examples=25)
def test_encrypting_shapes_match_once_per_file(seed, files, kind):
    state = PatternState()
    hits = 0
    for e in gen_trace(WorkloadSpec(kind, 742, files), seed).events:
        state, m = observe_event(state, e)
        hits += m is not None
    assert hits == files


# --- entropy stage ---------------------------------------------------------------

@pytest.mark.parametrize("target, ext, category, hit", [
    (4.62, "txt", FileCategory.TEXT, False),
    (7.98, "txt", FileCategory.TEXT, True),
    (7.94, "jpeg", FileCategory.NONTEXT, False),
    (7.995, "png", FileCategory.NONTEXT, True),
])
def test_entropy_thresholds_by_category(target, ext, category, hit):
    h = histogram_near(target)
    got_hit, value = check_entropy(model(ext, category, h), TH)
    assert abs(value - target) < 0.01
    assert got_hit is hit


def test_unknown_extension_hits_without_computing():
    f = FileModel("/a.gcry", "gcry", FileCategory.NONTEXT, 0)
    assert check_entropy(f, TH) == (True, None)


def test_deleted_file_counts_as_hit():
    assert check_entropy(None, TH) == (True, None)


def test_empty_known_file_is_safe():
    f = FileModel("/a.txt", "txt", FileCategory.TEXT, 0)
    assert check_entropy(f, TH) == (False, None)


def test_threshold_validation():
    with pytest.raises(ValueError):
        EntropyThresholds(text_threshold=8.0, nontext_threshold=7.0)
    with pytest.raises(ValueError):
        FrequencyConfig(threshold_ops_per_sec=0)


# --- frequency stage ---------------------------------------------------------------

def test_frequency_two_stamps_one_second():
    assert compute_frequency([0.0, 1.0]) == 2.0


@pytest.mark.parametrize("n, hit", [(601, True), (300, False)])
def test_frequency_uniform_spans(n, hit):
    times = [i / (n - 1) for i in range(n)]
    f = compute_frequency(times)
    assert f == pytest.approx(n)
    assert (f >= FrequencyConfig().threshold_ops_per_sec) is hit


@pytest.mark.parametrize("times", [[], [1.0], [2.0, 2.0]])
def test_frequency_insufficient(times):
    with pytest.raises(InsufficientDataError):
        compute_frequency(times)


# --- pipeline ------------------------------------------------------------------------

def run_class(kind, rate, files=100, size=1024, seed=0):
    spec = WorkloadSpec(kind, rate, files, size)
    trace = gen_trace(spec, seed)
    # replay with a live file table, as a host would see it
    files_now = {}
    detector = LocalDetector(DetectorConfig(), files_now.get)
    verdicts = []
    for event, state in iter_trace(spec, seed):
        if event.kind is D:
            files_now.pop(event.path, None)
        elif state is not None:
            files_now[event.path] = state
        verdicts.extend(detector.feed(event))
    if detector.pending:
        verdicts.append(detector.expire(detector.deadline))
    return trace, verdicts


def test_ransomware_742_small_files_anomalous():
    trace, verdicts = run_class(WorkloadClass.RANSOMWARE, 742)
    first = next(v for v in verdicts if v.anomalous)
    assert first.pattern_hit and first.entropy_hit and first.frequency_hit
    assert first.frequency_value >= 742
    assert first.trigger_path.rsplit(".", 1)[-1] in ("gnncry", "locked", "crypt", "enc")
    assert local_detect(trace.events, trace.files).anomalous


def test_compress_is_safe_and_pattern_never_fires():
    trace, verdicts = run_class(WorkloadClass.COMPRESS, 900, files=30)
    assert verdicts == []
    v = local_detect(trace.events, trace.files)
    assert v.state is Verdict.SAFE and not v.pattern_hit


def test_browse_342_safe():
    trace, verdicts = run_class(WorkloadClass.BROWSE, 342, files=50)
    assert not any(v.anomalous for v in verdicts)
    assert local_detect(trace.events, trace.files).state is Verdict.SAFE


def test_benign_encrypt_600_is_false_positive():
    _, verdicts = run_class(WorkloadClass.BENIGN_ENCRYPT, 600)
    assert any(v.anomalous for v in verdicts)


def test_slow_encryption_is_safe():
    _, verdicts = run_class(WorkloadClass.RANSOMWARE, 300, files=80)
    assert verdicts and not any(v.anomalous for v in verdicts)
    assert all(v.frequency_hit is False for v in verdicts)


def test_exact_boundary_500_hits():
    # 100 read/write stamps from the matched read at 0.0 to the last at 0.2
    events = [FsEvent(0.0, O, "/a.txt"), FsEvent(0.0, C, "/a.enc"), FsEvent(0.0, O, "/a.enc"),
              FsEvent(0.0, R, "/a.txt"), FsEvent(0.001, W, "/a.enc")]
    events += [FsEvent(0.001 + i * 0.001, R, "/b.txt") for i in range(1, 98)]
    events.append(FsEvent(0.2, R, "/b.txt"))
    v = local_detect(events, {})
    assert v.frequency_value == 500.0
    assert v.frequency_hit and v.anomalous


def test_entropy_miss_gives_safe_verdict_and_scanning_continues():
    text = FileModel("/plain.txt", "txt", FileCategory.TEXT, 4096, content_seed=1)
    det = LocalDetector(lookup={"/plain.txt": text}.get)
    out = []
    for i, k in enumerate([O, C, O, R, W]):
        out += det.feed(FsEvent(i * 0.001, k, "/plain.txt"))
    (v,) = out
    assert v.state is Verdict.SAFE and v.pattern_hit and v.entropy_hit is False
    assert v.frequency_hit is None and v.frequency_value is None
    assert not det.pending


def test_window_times_out_with_insufficient_data():
    det = LocalDetector()
    for i, k in enumerate([O, C, O, R]):
        det.feed(FsEvent(0.0, k, "/x.enc"))
    assert det.feed(FsEvent(0.0, W, "/x.enc")) == ()
    assert det.pending and det.deadline == 1.0
    v = det.expire(1.0)
    assert v.state is Verdict.SAFE and v.frequency_value is None and v.frequency_hit is False


def test_late_event_closes_window_first():
    det = LocalDetector()
    for k in [O, C, O, R, W]:
        det.feed(FsEvent(0.0, k, "/x.enc"))
    assert det.expire(0.5) is None
    out = det.feed(FsEvent(3.0, R, "/y"))
    assert len(out) == 1 and out[0].decided_at == 1.0


def test_window_excludes_stamps_before_matched_read():
    det = LocalDetector()
    for i in range(50):  # slow earlier activity that must not dilute the rate
        det.feed(FsEvent(i * 0.1, R, "/old.txt"))
        det.feed(FsEvent(i * 0.1 + 0.05, W, "/old.txt"))
    t = 10.0
    for k in [O, C, O]:
        det.feed(FsEvent(t, k, "/n.enc"))
    det.feed(FsEvent(t, R, "/n.txt"))
    det.feed(FsEvent(t + 0.001, W, "/n.enc"))
    assert det.window == [t, t + 0.001]


def test_verdict_line_format():
    v = DetectionVerdict(Verdict.ANOMALOUS, True, None, True, 742.0, True, "/a", 1.5)
    assert v.format_line(7) == "7\t1.500000\tanomalous\thit\thit\thit:742.000000"
    s = DetectionVerdict(Verdict.SAFE, decided_at=0.0)
    assert s.format_line(0) == "0\t0.000000\tsafe\tmiss\t-\t-"


def test_no_evidence_is_safe():
    v = local_detect([], {})
    assert v.state is Verdict.SAFE and not v.pattern_hit


@settings(max_examples=30, deadline=None)
@given(files=st.integers(5, 120), rate=st.floats(600, 3000), seed=st.integers(0, 2**32),
       size=st.sampled_from([512, 1024, 10240]))
def test_completeness_on_ransomware_corpus(files, rate, seed, size):
    trace = gen_trace(WorkloadSpec(WorkloadClass.RANSOMWARE, rate, files, size), seed)
    v = local_detect(trace.events, trace.files)
    assert v.anomalous


@settings(max_examples=30, deadline=None)
@given(kind=st.sampled_from([WorkloadClass.MODIFY, WorkloadClass.COMPRESS,
                             WorkloadClass.DECOMPRESS, WorkloadClass.BROWSE]),
       rate=st.floats(1, 399.9), files=st.integers(1, 60), seed=st.integers(0, 2**32))
def test_soundness_on_benign_corpus(kind, rate, files, seed):
    trace = gen_trace(WorkloadSpec(kind, rate, files), seed)
    assert local_detect(trace.events, trace.files).state is Verdict.SAFE


@settings(max_examples=30, deadline=None)
@given(kind=st.sampled_from(list(WorkloadClass)), rate=st.floats(50, 2000),
       files=st.integers(1, 40), seed=st.integers(0, 2**32))
def test_verdict_short_circuit_and_determinism(kind, rate, files, seed):
    trace = gen_trace(WorkloadSpec(kind, rate, files), seed)
    verdicts = []
    det = LocalDetector(lookup=trace.files.get)
    for e in trace.events:
        verdicts += det.feed(e)
    for v in verdicts:
        assert v.anomalous == bool(v.pattern_hit and v.entropy_hit and v.frequency_hit)
        if not v.pattern_hit:
            assert v.entropy_hit is None
        if not v.entropy_hit:
            assert v.frequency_hit is None
    assert local_detect(trace.events, trace.files) == local_detect(trace.events, trace.files)
