"""Regenerate the bundled 200-record pipeline fixture.

    python3 tests/fixtures/make_pipeline_fixture.py [OUT_DIR]

Output is a pure function of the seed below; ``test_pipeline_fixture_is_reproducible``
checks that the committed files match a fresh generation.
"""
from __future__ import annotations

import json
import random
import sys
from pathlib import Path

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE.parent))

import synth  # noqa: E402
from oamon.affiliation import fixture_filename  # noqa: E402
from oamon.classifier import Hyperparams, TrainingExample, save_model, train  # noqa: E402

SEED = 20180601
N_UNPAYWALL_ONLY = 140
N_BOTH = 30
N_HAL_ONLY = 30
SNAPSHOT = "2018-06-01"
UPDATE = "2019-03-01"


def _dumps(obj) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def generate(out: Path) -> None:
    rng = random.Random(SEED)
    out.mkdir(parents=True, exist_ok=True)
    (out / "html").mkdir(exist_ok=True)
    for old in (out / "html").glob("*.html"):
        old.unlink()

    journals = synth.journals(rng)
    tags = sorted(synth.TAG_WORDS)
    layouts = sorted(synth.LAYOUTS)
    n_total = N_UNPAYWALL_ONLY + N_BOTH + N_HAL_ONLY
    dois = [f"10.5555/oam.{i:04d}" for i in range(n_total)]

    unpaywall, hal, update = [], [], []
    for i, doi in enumerate(dois):
        year = rng.choice([2012, 2013, 2014, 2015, 2016, 2017, 2017, 2018]) if i % 9 else rng.choice([2013, 2017])
        journal = rng.choice(journals) if rng.random() < 0.9 else None
        tag = journal["tag"] if journal and rng.random() < 0.8 else rng.choice(tags)
        mix = rng.choice(tags) if rng.random() < 0.15 else None
        title = synth.make_title(rng, tag, mix_tag=mix)
        french = rng.random() < 0.55
        oa = rng.choice(["none", "none", "publisher", "repository", "both"])
        in_unpaywall = i < N_UNPAYWALL_ONLY + N_BOTH
        in_hal = i >= N_UNPAYWALL_ONLY

        if in_unpaywall:
            rec = synth.unpaywall_record(rng, doi, year, journal, title, french, oa)
            if i % 17 == 0:
                rec["doi"] = "https://doi.org/" + doi.upper()
            unpaywall.append(rec)
            if french and not in_hal:
                if rng.random() < 0.75:
                    layout = layouts[i % len(layouts)]
                    affs = [rng.choice(synth.FRENCH_AFFILIATIONS)]
                    if rng.random() < 0.5:
                        affs.append(rng.choice(synth.FOREIGN_AFFILIATIONS))
                    rng.shuffle(affs)
                    (out / "html" / fixture_filename(doi)).write_text(synth.LAYOUTS[layout](title, affs), "utf-8")
            elif rng.random() < 0.3:
                layout = layouts[(i + 3) % len(layouts)]
                affs = [rng.choice(synth.FOREIGN_AFFILIATIONS)]
                (out / "html" / fixture_filename(doi)).write_text(synth.LAYOUTS[layout](title, affs), "utf-8")
            # feed update: some closed records open up, a few change category
            if rng.random() < 0.25:
                later = dict(rec)
                later["doi"] = doi
                later["oa_locations"] = [synth.location(rng, doi, rng.choice(["publisher", "repository"]))]
                update.append(later)
        if in_hal:
            countries = ["fr"] if french else rng.choice([["de"], ["us", "gb"], []])
            if french and rng.random() < 0.3:
                countries.append("it")
            hal.append({
                "doi": doi if i % 5 else doi.upper(),
                "title": title,
                "year": year,
                "genre": rng.choice(["journal-article", "proceedings-article", None]),
                "structures_countries": sorted(countries),
                "fulltext_available": rng.random() < 0.4,
            })

    # rejects: malformed JSON, missing DOI, non-DOI identifier
    unpaywall.insert(37, '{"doi": "10.5555/broken", "title": ')
    unpaywall.insert(90, {"title": "No identifier at all", "year": 2015})
    unpaywall.insert(120, {"doi": "not-a-doi", "title": "Bad id", "year": 2016})

    def write_jsonl(path: Path, rows):
        path.write_text("".join((r if isinstance(r, str) else _dumps(r)) + "\n" for r in rows), "utf-8")

    write_jsonl(out / "unpaywall.jsonl", unpaywall)
    write_jsonl(out / "hal.jsonl", hal)
    write_jsonl(out / "unpaywall_update.jsonl", update)

    # classifier: training corpus, toy model, tag mapping
    corpus = synth.training_corpus(random.Random(SEED + 1), 1200)
    (out / "train.tsv").write_text("".join(f"{';'.join(labels)}\t{title}\n" for labels, title in corpus), "utf-8")
    examples = [TrainingExample(title, tuple(labels)) for labels, title in corpus]
    model = train(examples, Hyperparams(dim=16, buckets=1000, learning_rate=0.2, epochs=8, seed=7))
    save_model(model, out / "model.bin")
    mapping = [f"{t}\t{synth.TAG_MACRO[t[:3]]}\n" for t in tags if t != "010-humanities-linguistics"]
    (out / "mapping.tsv").write_text("# tag\tmacro-discipline\n" + "".join(mapping), "utf-8")

    names = sorted({f"{f}\t{g}\n" for f, g in synth.FRENCH_NAMES})
    (out / "names.tsv").write_text("".join(names), "utf-8")

    (out / "rules.toml").write_text(
        'country_code = "fr"\n'
        'country_keywords = ["France", "Cedex"]\n'
        'city_names_file = "cities.txt"\n'
        'exclusion_patterns = ["Texas", "Ontario"]\n', "utf-8")
    (out / "cities.txt").write_text(
        "# one city per line\nParis\nLyon\nVilleurbanne\nGrenoble\nMarseille\nRennes\nStrasbourg\nMontpellier\n",
        "utf-8")

    (out / "pipeline.toml").write_text(f"""# 200-record synthetic pipeline fixture
[run]
out_dir = "out"
year_min = 2013
year_max = 2017

[[ingest.inputs]]
source = "unpaywall"
path = "unpaywall.jsonl"
snapshot_date = "{SNAPSHOT}"

[[ingest.inputs]]
source = "hal"
path = "hal.jsonl"
snapshot_date = "{SNAPSHOT}"

[detect]
rules = "rules.toml"
html_dir = "html"
prefilter = ["names.tsv"]

[classify]
model = "model.bin"
mapping = "mapping.tsv"
tau = 0.5

[oa]
snapshot_date = "{SNAPSHOT}"

[report]
dimensions = ["year", "genre", "discipline", "publisher"]
formats = ["csv", "json", "svg"]
""", "utf-8")


if __name__ == "__main__":
    generate(Path(sys.argv[1]) if len(sys.argv) > 1 else HERE / "pipeline")
