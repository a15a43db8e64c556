"""Acceptance suite. One test per criterion; the terminal summary prints PASS/FAIL per number.

Run just this file with ``pytest tests/test_acceptance.py -v``.
"""
import json
import math
import random
import shutil
import string
import time
from datetime import date

import pytest

import synth
from conftest import PIPELINE_FIXTURE
from test_classifier import TOY, TOY_HP, gradient_probe, metrics_oracle, random_fixture, three_label_corpus
from test_ingest import merge_oracle, random_record
from test_oa import pub, random_sequence, replay, _rec as oa_rec
from test_report import counting_oracle, random_joined
from test_sampling import annotations, load_campaign, uniformity_counts, wilson_oracle
from test_affiliation import RULES, load_labeled_affiliations, FR_PAGE, US_PAGE, _rec as aff_rec

from oamon.affiliation import detect_country, extract_affiliations, fixture_filename, match_country
from oamon.affiliation.detect import DetectionSource
from oamon.classifier import Hyperparams, TrainingExample, evaluate, score_predictions, train, train_test_split
from oamon.cli import main
from oamon.ingest import OALocation, merge_by_doi
from oamon.oa import HostCategory, resolve_status
from oamon.pipeline import step_detect, step_ingest
from oamon.report import Dimension, JoinedRecord, aggregate, render
from oamon.sampling import estimate_precision, fn_breakdown

D0 = date(2018, 6, 1)


@pytest.mark.criterion(1)
def test_c01_metric_formulas():
    start = time.perf_counter()
    r = score_predictions([["A"], ["C"]], [{"A"}, {"B"}], ks=(1,))
    assert (r.precision_at[1], r.recall_at[1]) == (0.5, 0.5)
    rng = random.Random(2018)
    for _ in range(50):
        predicted, gold = random_fixture(rng)
        r = score_predictions(predicted, gold, ks=(1, 3, 5))
        for k in (1, 3, 5):
            assert (r.precision_at[k], r.recall_at[k]) == metrics_oracle(predicted, gold, k)
    assert time.perf_counter() - start < 1.0


@pytest.mark.criterion(2)
def test_c02_classifier_learnability():
    corpus = [TrainingExample(title, (label,)) for label, title in synth.disjoint_corpus(random.Random(10), 10, 5000)]
    train_set, test_set = train_test_split(corpus, 0.2, seed=10)
    assert len(test_set) == 1000
    start = time.perf_counter()
    model = train(train_set, Hyperparams(dim=32, buckets=100_000, learning_rate=0.2, epochs=5, seed=10))
    elapsed = time.perf_counter() - start
    p1 = evaluate(model, test_set, ks=(1,)).precision_at[1]
    print(f"P@1={p1:.4f} train {elapsed:.1f}s")
    assert p1 >= 0.95
    assert elapsed < 60
    toy = train(TOY, TOY_HP)
    assert all(b <= a for a, b in zip(toy.loss_history, toy.loss_history[1:]))


@pytest.mark.criterion(3)
def test_c03_gradient_check():
    errors = gradient_probe(100, seed=0)
    assert len(errors) == 100
    print(f"max relative error {max(errors):.2e}")
    assert max(errors) < 1e-4


def _random_title(rng):
    pool = string.ascii_letters + string.digits + " -'éèàçüßø中文αβ!?"
    kind = rng.random()
    if kind < 0.1:
        return ""
    if kind < 0.5:
        words = ["red", "cat", "oak", "the", "of", "green", "dog", "elm", "unseen", "xyzzy"]
        return " ".join(rng.choice(words) for _ in range(rng.randint(1, 12)))
    return "".join(rng.choice(pool) for _ in range(rng.randint(1, 80)))


@pytest.mark.criterion(4)
def test_c04_softmax_normalization():
    model = train(three_label_corpus(), Hyperparams(dim=8, buckets=500, epochs=5, seed=4))
    rng = random.Random(4)
    for _ in range(1000):
        p = model.probabilities(_random_title(rng))
        assert abs(float(p.sum()) - 1.0) <= 1e-6
        assert (p >= 0).all()


@pytest.mark.criterion(5)
def test_c05_affiliation_rules():
    rows = load_labeled_affiliations()
    assert len(rows) >= 50
    assert [(fr, t) for fr, t in rows if (match_country(t, RULES) is not None) != fr] == []

    affs = [synth.FRENCH_AFFILIATIONS[0], synth.FOREIGN_AFFILIATIONS[1], synth.FRENCH_AFFILIATIONS[4]]
    perfect = [name for name, layout in synth.LAYOUTS.items()
               if [a.text for a in extract_affiliations(layout("T", affs))] == affs]
    assert len(perfect) >= 5, perfect

    rng = random.Random(5)
    pages = [None, FR_PAGE, US_PAGE, "<p>nothing</p>"]
    for _ in range(1000):
        countries = [rng.choice(["fr", "FR", "Fr", "de", "us", "it", "be"]) for _ in range(rng.randint(0, 3))]
        html = rng.choice(pages)
        r = detect_country(aff_rec(), countries, html, RULES)
        if "fr" in {c.lower() for c in countries}:
            assert r.is_target_country and r.source is DetectionSource.HAL
        else:
            assert r == detect_country(aff_rec(), None, html, RULES)
        if not r.is_target_country:
            assert r.source is DetectionSource.NONE


@pytest.mark.criterion(6)
def test_c06_merge_semantics():
    rng = random.Random(6)
    for _ in range(100):
        n = rng.randint(0, 1000)
        recs = [random_record(rng, max(1, n // rng.randint(1, 20))) for _ in range(n)]
        merged = merge_by_doi(recs)
        assert merged == merge_oracle(recs)
        assert merge_by_doi(merged) == merged
        shuffled = recs[:]
        rng.shuffle(shuffled)
        assert merge_by_doi(shuffled) == merged


@pytest.mark.criterion(7)
def test_c07_oa_precedence_and_history():
    rng = random.Random(7)
    for i in range(1000):
        locs = [OALocation(f"https://h{rng.randrange(6)}/{i}", rng.choice(["publisher", "repository"]),
                           rng.choice([None, "cc-by", "cc0"])) for _ in range(rng.randint(0, 6))]
        hal = rng.random() < 0.3
        s = resolve_status(oa_rec(locs), hal, D0)
        has_pub = any(loc.host_type == "publisher" for loc in locs)
        assert (s.host_category is HostCategory.PUBLISHER) == has_pub
        forced = resolve_status(oa_rec(locs + [pub()]), hal, D0)
        assert forced.host_category is HostCategory.PUBLISHER
        if not has_pub:
            want = HostCategory.REPOSITORY if (locs or hal) else HostCategory.CLOSED
            assert s.host_category is want
    for _ in range(1000):
        seq = random_sequence(rng, max_len=20)
        h, firsts, _ = replay(seq)
        oa_dates = [st.observed_at for st in seq if st.is_oa]
        brute = None
        for d in oa_dates:
            if brute is None or d < brute:
                brute = d
        assert h.first_observed_oa == brute
        seen = None
        for f in firsts:
            if seen is not None:
                assert f == seen
            seen = f if f is not None else seen


@pytest.mark.criterion(8)
def test_c08_aggregation():
    rng = random.Random(8)
    for _ in range(100):
        joined = random_joined(rng, 1000)
        population = sum(j.detected for j in joined)
        for dim in Dimension:
            rows = aggregate(joined, dim)
            want, size = counting_oracle(joined, dim.value)
            assert {r.group: (r.n_total, r.n_publisher_hosted, r.n_repository_hosted) for r in rows} == want
            assert size == population
            assert sum(r.n_total for r in rows) == population
    cats = [HostCategory.PUBLISHER] * 2 + [HostCategory.REPOSITORY] + [HostCategory.CLOSED] * 7
    group = [JoinedRecord(f"10.1/{i}", 2017, "journal-article", "Mathematics", "P", c, True)
             for i, c in enumerate(cats)]
    (row,) = aggregate(group, "discipline")
    assert f"{row.oa_rate:.4f}" == "0.3000"
    assert render([row], "csv").splitlines()[1].split(",")[-1] == "0.3000"


@pytest.mark.criterion(9)
def test_c09_sampling_estimates():
    est = estimate_precision(annotations(96, 100))
    assert est.point == 0.96
    low, high = wilson_oracle(96, 100)
    assert abs(est.wilson_low - low) <= 1e-9 and abs(est.wilson_high - high) <= 1e-9

    rows = {}
    for year in (2013, 2017):
        fb = fn_breakdown(*load_campaign(year))
        rows[year] = (fb.pct_now_oa_in_feed, fb.pct_still_closed_but_oa, fb.pct_total_false_negative)
    assert rows == {2013: (2, 1, 3), 2017: (5, 6, 11)}

    n_seeds, size = 10_000, 10
    counts = uniformity_counts(n_seeds, size)
    expected = n_seeds / size
    sigma = math.sqrt(n_seeds * (1 / size) * (1 - 1 / size))
    worst = max(abs(c - expected) / sigma for c in counts.values())
    print(f"worst deviation {worst:.2f} sigma")
    assert worst <= 5


@pytest.mark.criterion(10)
def test_c10_end_to_end_determinism(tmp_path, capsys):
    work = tmp_path / "fx"
    shutil.copytree(PIPELINE_FIXTURE, work)
    config = work / "pipeline.toml"
    out = work / "out"

    def snapshot():
        manifest = json.loads((out / "run_manifest.json").read_text())
        digests = {s["subcommand"]: s["output_digests"] for s in manifest["steps"]}
        reports = {p.name: p.read_bytes() for p in sorted((out / "reports").iterdir())}
        return manifest["status"], digests, reports

    timings = []
    for argv in (["run", "--config", str(config)], ["run", "--config", str(config), "--overwrite"]):
        start = time.perf_counter()
        assert main(argv) == 0
        timings.append(time.perf_counter() - start)
        if len(timings) == 1:
            first = snapshot()
    second = snapshot()
    capsys.readouterr()
    assert first[0] == "completed"
    assert first[2] and first == second
    print("run seconds: " + ", ".join(f"{t:.1f}" for t in timings))
    assert max(timings) < 30


# --- throughput ------------------------------------------------------------------------------

N_THROUGHPUT = 100_000


@pytest.fixture(scope="module")
def throughput_corpus(tmp_path_factory):
    """100k Unpaywall-shaped lines, half French, with an HTML fixture for every 20th DOI."""
    root = tmp_path_factory.mktemp("throughput")
    rng = random.Random(11)
    journals = synth.journals(rng)
    layouts = sorted(synth.LAYOUTS)
    (root / "html").mkdir()
    hal_lines = []
    with open(root / "in.jsonl", "w", encoding="utf-8") as fh:
        for i in range(N_THROUGHPUT):
            doi = f"10.9999/t.{i:06d}"
            j = rng.choice(journals)
            french = rng.random() < 0.5
            rec = synth.unpaywall_record(rng, doi, rng.randint(2013, 2017), j, synth.make_title(rng, j["tag"]),
                                         french, rng.choice(["none", "publisher", "repository"]))
            fh.write(json.dumps(rec) + "\n")
            if i % 10 == 5:
                hal_lines.append(f"{doi}\t{'fr' if french else 'de'}\n")
            if i % 20 == 0:
                aff = rng.choice(synth.FRENCH_AFFILIATIONS if french else synth.FOREIGN_AFFILIATIONS)
                page = synth.LAYOUTS[layouts[i % len(layouts)]]("t", [aff])
                (root / "html" / fixture_filename(doi)).write_text(page, encoding="utf-8")
    (root / "hal.tsv").write_text("".join(hal_lines), encoding="utf-8")
    return root


@pytest.mark.criterion(11)
def test_c11_throughput(throughput_corpus):
    root = throughput_corpus
    inputs = [{"path": root / "in.jsonl", "source": "unpaywall", "snapshot_date": D0}]
    rates = []
    # best of three: the first pass also warms the page cache and imports
    for attempt in range(3):
        store = root / f"store{attempt}"
        start = time.perf_counter()
        ing = step_ingest(inputs, store)
        det = step_detect(store, root / f"det{attempt}.jsonl", html_dir=root / "html",
                          hal_countries=root / "hal.tsv")
        elapsed = time.perf_counter() - start
        assert ing.counts["read"] == N_THROUGHPUT
        assert det.counts["records"] == ing.counts["merged"]
        assert det.counts["hal"] > 0 and det.counts["scraped-html"] > 0
        rates.append(N_THROUGHPUT / elapsed)
        shutil.rmtree(store)
    print("records/s per pass: " + ", ".join(f"{r:,.0f}" for r in rates))
    assert max(rates) >= 20_000
