import random
from datetime import date, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oamon.errors import DuplicateOrStale
from oamon.ingest import OALocation, PublicationRecord, SourceTag
from oamon.oa import (
    HostCategory,
    OAHistory,
    OAStatus,
    apply_update,
    read_histories,
    resolve_records,
    resolve_status,
    time_to_oa,
    write_histories,
)

D0 = date(2018, 6, 1)
DOI = "10.1/x"


def _rec(locs=(), doi=DOI, year=2016, hal_fulltext=False):
    return PublicationRecord(doi, frozenset({SourceTag.UNPAYWALL}), "T", year, oa_locations=tuple(locs),
                             hal_fulltext=hal_fulltext)


def pub(url="https://p/x", license="cc-by"):
    return OALocation(url, "publisher", license)


def repo(url="https://r/x", license=None):
    return OALocation(url, "repository", license)


def status(category, when, doi=DOI):
    return OAStatus(doi, category is not HostCategory.CLOSED, category, when)


# --- resolve_status --------------------------------------------------------------------------

def test_resolve_examples():
    s = resolve_status(_rec([repo(license="cc-by-nc"), pub(license="cc-by")]), False, D0)
    assert (s.host_category, s.is_oa, s.license) == (HostCategory.PUBLISHER, True, "cc-by")
    s = resolve_status(_rec(), True, D0)
    assert (s.host_category, s.is_oa) == (HostCategory.REPOSITORY, True)
    s = resolve_status(_rec(), False, D0)
    assert (s.host_category, s.is_oa, s.license) == (HostCategory.CLOSED, False, None)
    s = resolve_status(_rec([repo(license="cc0")]), False, D0)
    assert (s.host_category, s.license) == (HostCategory.REPOSITORY, "cc0")


def test_status_invariant():
    with pytest.raises(ValueError):
        OAStatus(DOI, True, HostCategory.CLOSED, D0)
    with pytest.raises(ValueError):
        OAStatus(DOI, False, HostCategory.REPOSITORY, D0)


_loc = st.builds(lambda i, h, lic: OALocation(f"https://h/{i}", h, lic),
                 st.integers(0, 5), st.sampled_from(["publisher", "repository"]), st.sampled_from([None, "cc-by"]))


@given(st.lists(_loc, max_size=6), st.booleans())
def test_publisher_location_dominates(locs, hal):
    s = resolve_status(_rec(locs + [pub()]), hal, D0)
    assert s.host_category is HostCategory.PUBLISHER and s.is_oa
    base = resolve_status(_rec(locs), hal, D0)
    assert base.is_oa == (bool(locs) or hal)


# --- histories ---------------------------------------------------------------------------------

def test_apply_update_examples():
    h, t = apply_update(OAHistory(DOI), status(HostCategory.CLOSED, date(2018, 6, 1)))
    assert t is None and h.first_observed_oa is None
    h, t = apply_update(h, status(HostCategory.REPOSITORY, date(2019, 3, 1)))
    assert (t.from_category, t.to_category) == (HostCategory.CLOSED, HostCategory.REPOSITORY)
    assert (t.from_date, t.to_date) == (date(2018, 6, 1), date(2019, 3, 1))
    assert h.first_observed_oa == date(2019, 3, 1)

    h, _ = apply_update(OAHistory(DOI), status(HostCategory.PUBLISHER, date(2018, 6, 1)))
    h, t = apply_update(h, status(HostCategory.CLOSED, date(2019, 3, 1)))
    assert h.first_observed_oa == date(2018, 6, 1)
    assert t.to_category is HostCategory.CLOSED

    with pytest.raises(DuplicateOrStale):
        apply_update(h, status(HostCategory.CLOSED, date(2019, 3, 1)))
    with pytest.raises(DuplicateOrStale):
        apply_update(h, status(HostCategory.CLOSED, date(2018, 1, 1)))
    with pytest.raises(ValueError):
        apply_update(h, status(HostCategory.CLOSED, date(2020, 1, 1), doi="10.1/other"))


def test_apply_update_does_not_mutate():
    h0 = OAHistory(DOI)
    apply_update(h0, status(HostCategory.PUBLISHER, D0))
    assert h0.statuses == [] and h0.first_observed_oa is None


def test_no_transition_when_category_unchanged():
    h, _ = apply_update(OAHistory(DOI), status(HostCategory.REPOSITORY, date(2018, 6, 1)))
    _, t = apply_update(h, status(HostCategory.REPOSITORY, date(2019, 3, 1)))
    assert t is None


@pytest.mark.parametrize("first,year,days", [
    (date(2018, 6, 15), 2017, 530),
    (date(2017, 1, 1), 2017, 0),
    (None, 2017, None),
])
def test_time_to_oa(first, year, days):
    assert time_to_oa(OAHistory(DOI, first_observed_oa=first), year) == days


def test_time_to_oa_530_by_day_count():
    # 2017 is not a leap year: 365 days to 2018-01-01, then Jan..May 2018 and 14 more days
    assert 365 + 31 + 28 + 31 + 30 + 31 + 14 == 530


def random_sequence(rng: random.Random, max_len: int = 20):
    when = date(2013, 1, 1) + timedelta(days=rng.randrange(2000))
    seq = []
    for _ in range(rng.randint(1, max_len)):
        when += timedelta(days=rng.randint(1, 400))
        seq.append(status(rng.choice(list(HostCategory)), when))
    return seq


def replay(seq):
    h = OAHistory(DOI)
    firsts, transitions = [], []
    for s in seq:
        h, t = apply_update(h, s)
        firsts.append(h.first_observed_oa)
        transitions.append(t)
    return h, firsts, transitions


@settings(max_examples=200)
@given(st.integers(0, 2**32 - 1))
def test_history_properties(seed):
    seq = random_sequence(random.Random(seed))
    h, firsts, transitions = replay(seq)
    oa_dates = [s.observed_at for s in seq if s.is_oa]
    assert h.first_observed_oa == (min(oa_dates) if oa_dates else None)
    # once set, never moves
    set_values = [f for f in firsts if f is not None]
    assert len(set(set_values)) <= 1
    assert all(h.first_observed_oa <= d for d in oa_dates)
    # transitions exactly at category changes
    for prev, cur, t in zip(seq, seq[1:], transitions[1:]):
        assert (t is not None) == (prev.host_category is not cur.host_category)
    # replay determinism
    assert replay(seq)[0] == h


def test_history_round_trip(tmp_path):
    recs = [_rec([pub()], doi="10.1/a", year=2015), _rec([], doi="10.1/b", year=2017),
            _rec([], doi="10.1/c", year=None)]
    histories = [h for h, _ in resolve_records(recs, D0, hal_fulltext={"10.1/b"})]
    files = write_histories(tmp_path, histories)
    assert sorted(p.name for p in files) == ["2015.jsonl", "2017.jsonl", "unknown.jsonl"]
    back = read_histories(tmp_path)
    assert back == {h.doi: h for h in histories}
    assert back["10.1/b"].latest.host_category is HostCategory.REPOSITORY
    assert back["10.1/a"].first_observed_oa == D0
