import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tracelens.errors import InputError, LogParseError, VocabularyError
from tracelens.ingest import (SECONDS_PER_DAY, Session, TimeCut, UserRecord, Vocabulary,
                              apply_time_cut, count_matrix, parse_cuts, parse_log,
                              parse_vocabulary, serialize_log)

SAMPLE_VIEWS = ["TermsAndConditions", "Main", "TopApps", "Main", "Last7Days", "Main",
              "PeriodSelector", "Main", "UseStop"]


def test_default_vocabulary_layout(vocab):
    assert vocab.size == 15
    assert vocab.name(0) == "TermsAndConditions"
    assert vocab.name(7) == "UseStop"
    assert vocab.name(14) == "Task"
    assert vocab.start_state == 0 and vocab.stop_state == 7


def test_vocabulary_rejects_gaps_and_duplicates():
    with pytest.raises(VocabularyError):
        parse_vocabulary("0\tA\n2\tUseStop\n")
    with pytest.raises(VocabularyError):
        Vocabulary(("A", "A", "UseStop"), 0, 2)


def test_sample_first_session(vocab, sample_text):
    records = parse_log(sample_text, vocab)
    assert len(records) == 1
    rec = records[0]
    assert rec.device_id == "xx:xx:xx:xx:xx:xx"
    assert len(rec.sessions) == 1
    assert [vocab.name(s) for s in rec.sessions[0].states] == SAMPLE_VIEWS
    assert rec.first_seen <= rec.last_seen


def test_empty_sessions_array(vocab):
    doc = json.dumps([{"deviceid": "d", "totalevents": 0, "firstSeen": "2013-08-20 09:10:59",
                       "lastSeen": "2013-08-20 09:10:59", "sessions": []}])
    (rec,) = parse_log(doc, vocab)
    assert rec.sessions == ()


def test_unknown_view_is_named(vocab, sample_text):
    doc = sample_text.replace('"data":"TopApps"', '"data":"Bogus"')
    with pytest.raises(VocabularyError) as info:
        parse_log(doc, vocab)
    assert "Bogus" in str(info.value)
    assert info.value.names == ["Bogus"]


def test_malformed_json_reports_byte_offset(vocab):
    doc = '[{"deviceid": "é", oops}]'
    with pytest.raises(LogParseError) as info:
        parse_log(doc, vocab)
    # 'é' is two bytes in UTF-8, so the byte offset is one past the char offset
    assert info.value.offset == doc.index("oops") + 1
    assert "byte offset" in str(info.value)


def test_missing_stop_is_appended(vocab):
    doc = json.dumps([{"deviceid": "d", "totalevents": 2, "firstSeen": "2013-08-20 09:00:00",
                       "lastSeen": "2013-08-20 09:01:00",
                       "sessions": [[{"timestamp": "2013-08-20 09:00:00", "data": "Main"},
                                     {"timestamp": "2013-08-20 09:01:00", "data": "TopApps"}]]}])
    (rec,) = parse_log(doc, vocab)
    assert rec.sessions[0].states == [1, 2, vocab.stop_state]
    assert rec.sessions[0].events[-1][0] == rec.sessions[0].events[-2][0]


def test_bad_timestamp_rejected(vocab, sample_text):
    with pytest.raises(LogParseError):
        parse_log(sample_text.replace("09:11:59", ":11:59"), vocab)


def test_decreasing_timestamps_rejected(vocab, sample_text):
    with pytest.raises(LogParseError):
        parse_log(sample_text.replace("09:11:46", "09:11:00"), vocab)


def test_time_cut_first_day(vocab, sample_text):
    records = parse_log(sample_text, vocab)
    ts = apply_time_cut(records, TimeCut(0, 1), vocab)
    (device, seq) = ts.traces[0]
    assert [vocab.name(s) for s in seq] == SAMPLE_VIEWS


def test_time_cut_outside_activity_omits_user(vocab, sample_text):
    records = parse_log(sample_text, vocab)
    assert len(apply_time_cut(records, TimeCut(30, 60), vocab)) == 0


def _session(t0, states):
    return Session(tuple((t0 + i, s) for i, s in enumerate(states)))


def test_sessions_on_days_two_and_three_concatenate(vocab):
    t0 = 1_000_000
    rec = UserRecord("u", t0, t0 + 4 * SECONDS_PER_DAY, (
        _session(t0, [0, 1, 7]),
        _session(t0 + 2 * SECONDS_PER_DAY + 5, [1, 2, 7]),
        _session(t0 + 3 * SECONDS_PER_DAY + 5, [1, 3, 7]),
    ))
    ts = apply_time_cut([rec], TimeCut(1, 7), vocab)
    # start symbol prepended; both sessions kept, separated by UseStop
    assert ts.traces[0][1] == [0, 1, 2, 7, 1, 3, 7]


def test_session_straddling_boundary_goes_by_first_event(vocab):
    t0 = 0
    rec = UserRecord("u", t0, 2 * SECONDS_PER_DAY, (
        Session(((SECONDS_PER_DAY - 1, 1), (SECONDS_PER_DAY + 10, 7))),
    ))
    assert len(apply_time_cut([rec], TimeCut(0, 1), vocab)) == 1
    assert len(apply_time_cut([rec], TimeCut(1, 2), vocab)) == 0


def test_configurable_cut_start_symbol(vocab):
    rec = UserRecord("u", 0, 10, (_session(0, [1, 2, 7]),))
    ts = apply_time_cut([rec], TimeCut(0, 1), vocab, start_symbol=1)
    assert ts.traces[0][1] == [1, 2, 7]
    assert ts.start_symbol == 1


def test_parse_cuts():
    cuts = parse_cuts("0:1,1:7,30:inf")
    assert cuts[0] == TimeCut(0, 1)
    assert math.isinf(cuts[2].d2)
    with pytest.raises(InputError):
        TimeCut(3, 3)


@pytest.mark.parametrize("trace, expected", [
    ([0, 1, 0, 1], {(0, 1): 2, (1, 0): 1}),
    ([5, 5, 5], {(5, 5): 2}),
])
def test_count_matrix_hand_counts(vocab, trace, expected):
    C = count_matrix(trace, vocab)
    want = np.zeros((15, 15), dtype=int)
    for (i, j), c in expected.items():
        want[i, j] = c
    assert np.array_equal(C, want)


def test_count_matrix_sample(vocab, sample_text):
    seq = parse_log(sample_text, vocab)[0].sessions[0].states
    C = count_matrix(seq, vocab)
    main, top, stop = vocab.index("Main"), vocab.index("TopApps"), vocab.index("UseStop")
    assert C.sum() == 8
    assert C[main, top] == 1 and C[main, stop] == 1


def test_count_matrix_too_short(vocab):
    with pytest.raises(InputError):
        count_matrix([3], vocab)


# -- properties -----------------------------------------------------------

traces = st.lists(st.integers(0, 14), min_size=2, max_size=60)


@given(traces)
def test_count_total_is_length_minus_one(trace):
    from tracelens.ingest import default_vocabulary
    assert count_matrix(trace, default_vocabulary()).sum() == len(trace) - 1


@st.composite
def user_records(draw):
    t0 = 1_376_956_800
    n_sessions = draw(st.integers(0, 6))
    starts = sorted(draw(st.lists(st.integers(0, 90 * SECONDS_PER_DAY), min_size=n_sessions,
                                  max_size=n_sessions, unique=True)))
    sessions = []
    for s in starts:
        body = draw(st.lists(st.sampled_from([1, 2, 3, 4, 8, 9]), min_size=0, max_size=6))
        sessions.append(_session(t0 + s, body + [7]))
    last = sessions[-1].events[-1][0] if sessions else t0
    return UserRecord(f"dev{draw(st.integers(0, 999))}", t0, last, tuple(sessions))


@settings(max_examples=60)
@given(st.lists(user_records(), max_size=4))
def test_log_round_trip(records):
    from tracelens.ingest import default_vocabulary
    vocab = default_vocabulary()
    again = parse_log(serialize_log(records, vocab), vocab)
    assert again == records


@settings(max_examples=60)
@given(user_records(), st.integers(1, 89))
def test_cut_partition(rec, a):
    from tracelens.ingest import default_vocabulary
    vocab = default_vocabulary()
    whole = apply_time_cut([rec], TimeCut(0, math.inf), vocab)
    flat = [s for sess in rec.sessions for s in sess.states]
    if rec.sessions:
        expected = flat if flat[0] == vocab.start_state else [vocab.start_state] + flat
        assert whole.traces[0][1] == expected
    else:
        assert len(whole) == 0

    def kept(cut):
        lo, hi = rec.first_seen + cut.d1 * SECONDS_PER_DAY, rec.first_seen + cut.d2 * SECONDS_PER_DAY
        return {i for i, s in enumerate(rec.sessions) if lo <= s.start_time < hi}

    left, right, both = kept(TimeCut(0, a)), kept(TimeCut(a, 90)), kept(TimeCut(0, 90))
    assert not left & right
    assert left | right == both
