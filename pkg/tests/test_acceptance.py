"""End-to-end guarantees, each checked against an oracle coded in this file.

Every test here re-derives its expected values independently of the library
(brute-force pair counting, regex anchor counting, hand-built records) so a
shared bug cannot hide. One test per guarantee; the summary hook in conftest
prints a pass/fail line for each.
"""

from __future__ import annotations

import json
import os
import re
import time
from pathlib import Path

import numpy as np
import pytest
from fastapi.testclient import TestClient

from refneed import (
    CLASSES,
    FEATURE_TEMPLATE,
    MediaWikiClient,
    SentenceRecord,
    auc_roc,
    balanced_sample,
    bench,
    binary_metrics,
    bootstrap_auc,
    compute_rn,
    create_app,
    filter_records,
    from_jsonl_line,
    get_config,
    load_bundle,
    parse_document,
    records_from_document,
    split_by_page,
    stub_classifier,
    to_jsonl_line,
    verbalizer_score,
)
from refneed.classifier import SentenceFeatures
from refneed.errors import MalformedMarkup
from refneed.verbalizer import ReplayVerbalizerClient, verbalize_scores
from refneed.wikitext import RawRevision

from support import REPLAY_FIXTURE, FakeResponse, FakeSession, acceptance_notes, api_payload


def make_record(
    sentence: str,
    *,
    wiki_db: str = "enwiki",
    page_id: int = 1,
    section: str = "history",
    label: int = 0,
) -> SentenceRecord:
    return SentenceRecord(
        wiki_db=wiki_db,
        page_id=page_id,
        page_title=f"Page {page_id}",
        revision_id=page_id * 10 + 1,
        section_name=section,
        sentence=sentence,
        next_sent="",
        prev_sent="",
        paragraph=sentence,
        label=label,
    )


# -- score formula -------------------------------------------------------------


def test_reference_need_score_matches_counting_oracle():
    """score == flagged / (cited + flagged), 0/0 -> 0, monotone in each flag."""
    rng = np.random.default_rng(20240814)
    start = time.perf_counter()

    assert compute_rn(0, []) == 0.0

    for _ in range(1000):
        cited = int(rng.integers(0, 51))
        flags = rng.integers(0, 2, size=int(rng.integers(0, 51))).tolist()
        got = compute_rn(cited, flags)

        k = sum(flags)
        expected = 0.0 if cited + k == 0 else k / (cited + k)
        assert got == expected

        for i in range(len(flags)):
            flipped = list(flags)
            flipped[i] = 1 - flipped[i]
            other = compute_rn(cited, flipped)
            if flipped[i]:
                assert other >= got
            else:
                assert other <= got

    assert time.perf_counter() - start < 1.0


# -- parser safety and anchor fidelity -----------------------------------------

# Flat snippets: every reference marker sits at markup top level, so a regex
# over the raw source counts exactly the anchors the parser must report.
FLAT_SNIPPETS = [
    ("en", "Alpha beta gamma delta.<ref>Smith 2001</ref> Next sentence here."),
    ("en", 'Claim one stands.<ref name="a">Jones</ref> Claim two follows.<ref name="b">Brown</ref>'),
    ("en", 'First claim here.<ref name="a">Jones</ref> Second claim repeats.<ref name="a" />'),
    ("en", "The bridge opened in 1901.{{sfn|Smith|2001}}"),
    ("en", "The accord was signed that year.{{harvnb|Lee|1999|p=3}}"),
    ("en", "One fact.{{sfn|A|2000}} Another fact.{{sfn|B|2001}} Third fact.{{sfn|C|2002}}"),
    ("en", 'Figures rose sharply afterwards.<ref group="note" name="x">n</ref>'),
    ("en", 'Stated twice before this point.<ref name="x"/>'),
    ("en", "Mixed support appears here.<ref>R</ref> And a template too.{{harvnb|Q|1980}}"),
    ("en", "Backed claim with nested cite.<ref>{{cite web|url=http://e.example|title=T}}</ref>"),
    ("en", "Noted in a footnote elsewhere.{{refn|group=n|See the discussion.}}"),
    ("ja", "東京は日本の首都である。{{sfn|田中|2005}}次の文が続く。"),
    ("ja", "漢字の文がここにある。<ref>出典</ref>続きの文もある。"),
    ("ja", "事実はここに書かれている。{{harv|佐藤|1999}}"),
    ("en", 'Claim.<ref name="z">Z</ref> Again.<ref name="z" /> And again.<ref name="z" />'),
    ("en", "Everything ends with support.<ref>end</ref>"),
    ("en", "Para one fact stands.<ref>1</ref>\n\nPara two fact stands.<ref>2</ref>"),
    ("en", "== History ==\nThe town was founded early.<ref>h</ref>"),
    ("en", "The '''treaty''' was ''signed'' in full.{{sfn|K|1944}}"),
    ("en", "The [[Golden Gate Bridge|bridge]] finally opened.<ref>g</ref>"),
    ("en", "See [http://example.org the site] for details.<ref>e</ref>"),
    ("en", "* First item claim.<ref>i</ref>\n* Second item claim.{{sfn|L|2020}}"),
    ("en", "Derived from the town archives.{{sfnp|Arch|1890}}"),
    ("en", "Shouted support in capitals.<REF>caps</REF> Quiet tail."),
]

# Tricky snippets: constructs that hide or swallow markers (comments, tables,
# nowiki, recovery paths). Safety is asserted; anchor counts are not.
TRICKY_SNIPPETS = [
    ("en", "Visible claim.<!-- <ref>hidden</ref> --> Tail sentence."),
    ("en", "Literal markup <nowiki><ref>shown</ref></nowiki> here."),
    ("en", "Lead claim.<ref>x</ref>\n{| class=wikitable\n|-\n| cell<ref>y</ref>\n|}\nTail claim."),
    ("en", "Broken start.<ref>never closed\nNext line continues anyway."),
    ("en", "Dangling {{sfn|X\nMore text follows the break."),
    ("en", "Deep {{refn|outer {{sfn|In|1}} tail}} end of line."),
    ("en", "[[File:X.jpg|thumb|Caption claim.<ref>c</ref>]] Body text here."),
    ("en", "Formula <math>x^2 + y</math> appears.<ref>m</ref>"),
    ("en", "__NOTOC__ Plain statement follows the magic word.{{sfn|M|2010}}"),
    ("en", "== A ==\n=== B ===\nNested section claim.<ref>s</ref>\n== C ==\nLast claim.{{harv|W|2011}}"),
    ("fa", "این جمله به فارسی است.<ref>منبع</ref> جمله بعدی ادامه دارد."),
    ("en", "'''''Unbalanced quote mess'' keeps going.<ref>q</ref>"),
]

_SELF_CLOSING_REF = re.compile(r"<ref\b[^>]*?/\s*>", re.IGNORECASE)
_PAIRED_REF_OPEN = re.compile(r"<ref\b[^>]*?(?<!/)>", re.IGNORECASE)
_CITE_TEMPLATE_OPEN = re.compile(r"\{\{\s*(?:sfn[pm]?|harvnb|harv|refn)\s*[|}]", re.IGNORECASE)

FUZZ_FRAGMENTS = [
    "<ref>", "</ref>", '<ref name="a"/>', '<ref name="a">', "<REF>", "</REF>",
    "{{", "}}", "{{sfn|x}}", "{{cite web|url=u}}", "{{harvnb|y|2000", "{{!}}",
    "{|", "|}", "|-", "| cell", "[[", "]]", "[[Link|label]]", "[[File:a.png|thumb|cap]]",
    "[http://e.example label]", "<!--", "-->", "<!-- note -->", "<nowiki>", "</nowiki>",
    "<math>", "</math>", "<br>", "<b>bold</b>", "== head ==", "=== deeper ===",
    "'''", "''", "* item", "# item", ";term", ":def", "----", "__TOC__",
    "plain words here ", "Tail sentence ends. ", "日本語の文章。", "中文句子！",
    "جملة قصيرة؟", "русский текст. ", "\n", "\n\n", "|", "=", "&amp;", "&lt;",
]


def regex_anchor_count(source: str) -> int:
    return (
        len(_SELF_CLOSING_REF.findall(source))
        + len(_PAIRED_REF_OPEN.findall(source))
        + len(_CITE_TEMPLATE_OPEN.findall(source))
    )


def parsed_texts(doc) -> list[str]:
    texts = [s.title for s in doc.sections]
    texts += [p.plaintext for s in doc.sections for p in s.paragraphs]
    return texts


def assert_markup_free(texts: list[str]) -> None:
    for text in texts:
        low = text.lower()
        assert "<ref" not in low
        assert "{{" not in text


def test_parser_never_leaks_markup_and_counts_anchors():
    """No snippet or fuzz input leaks refs or braces; flat anchor counts exact."""
    assert len(FLAT_SNIPPETS) + len(TRICKY_SNIPPETS) >= 30
    start = time.perf_counter()

    for i, (lang, source) in enumerate(FLAT_SNIPPETS):
        rev = RawRevision(lang=lang, rev_id=i + 1, page_id=i + 1, page_title="F", wikitext=source)
        doc = parse_document(rev, get_config(lang))
        assert_markup_free(parsed_texts(doc))
        found = sum(len(p.anchors) for s in doc.sections for p in s.paragraphs)
        assert found == regex_anchor_count(source), source

    for i, (lang, source) in enumerate(TRICKY_SNIPPETS):
        rev = RawRevision(lang=lang, rev_id=i + 1, page_id=i + 1, page_title="T", wikitext=source)
        doc = parse_document(rev, get_config(lang))
        assert_markup_free(parsed_texts(doc))

    rng = np.random.default_rng(99)
    config = get_config("en")
    for i in range(10_000):
        n = int(rng.integers(0, 13))
        picks = rng.integers(0, len(FUZZ_FRAGMENTS), size=n)
        source = "".join(FUZZ_FRAGMENTS[j] for j in picks)
        rev = RawRevision(lang="en", rev_id=i + 1, page_id=i + 1, page_title="Z", wikitext=source)
        try:
            doc = parse_document(rev, config)
        except MalformedMarkup:
            continue
        assert_markup_free(parsed_texts(doc))

    assert time.perf_counter() - start < 30.0


# -- corpus filters ------------------------------------------------------------

FILTER_DOC = """Lead sentence long enough to survive the length rule.

== History ==
The town grew quickly during the early mining boom.

== See also ==
The related article list would normally sit here today.

== References ==
Reference prose would normally sit right here today.
"""

FILTER_VOCAB = (
    "answer bridge call down east fact gate hill iron joint keep lane mark "
    "north order plain quay rise stone trade under vale works year zone"
).split()


def random_record_set(rng: np.random.Generator) -> list[SentenceRecord]:
    records = []
    for _ in range(int(rng.integers(1, 25))):
        if rng.random() < 0.2:
            length = int(rng.integers(4, 20))
            sentence = "".join(chr(int(rng.integers(0x4E00, 0x4FF0))) for _ in range(length))
        else:
            words = rng.integers(0, len(FILTER_VOCAB), size=int(rng.integers(1, 11)))
            sentence = " ".join(FILTER_VOCAB[w] for w in words) + "."
        records.append(
            make_record(
                sentence,
                page_id=int(rng.integers(1, 9)),
                label=int(rng.integers(0, 2)),
            )
        )
    return records


def test_sentence_filters_drop_short_duplicate_and_excluded():
    """Five-word sentences go, six-word stay; dups and excluded sections drop."""
    five = make_record("Another name is a train.")
    six = make_record("Another name is a night train.", page_id=2)
    kept = filter_records([five, six])
    assert [r.sentence for r in kept] == ["Another name is a night train."]

    repeated = "This exact sentence appears twice in the corpus."
    first = make_record(repeated, page_id=3)
    second = make_record(repeated, page_id=4)
    survivors = filter_records([first, second])
    assert len(survivors) == 1
    assert survivors[0].page_id == 3

    rev = RawRevision(lang="en", rev_id=5, page_id=5, page_title="F", wikitext=FILTER_DOC)
    records = records_from_document(parse_document(rev, get_config("en")))
    assert {r.section_name for r in records} == {"", "history"}

    rng = np.random.default_rng(7)
    for _ in range(1000):
        records = random_record_set(rng)
        once = filter_records(records)
        assert filter_records(once) == once


# -- wikitext to record round trip ----------------------------------------------


def test_jackdaw_systematics_record_round_trip(jackdaw_revision):
    """The flock paragraph parses into the exact expected record."""
    records = records_from_document(parse_document(jackdaw_revision, get_config("en")))
    match = [r for r in records if "archaic collective noun" in r.sentence]
    assert len(match) == 1
    record = match[0]

    assert record.wiki_db == "enwiki"
    assert record.page_id == 212989
    assert record.page_title == "Western jackdaw"
    assert record.revision_id == 1223095791
    assert record.section_name == "systematics"
    assert record.sentence == 'An archaic collective noun for a group of jackdaws is a "clattering"'
    assert record.next_sent == 'Another name for a flock is a "train".'
    assert record.prev_sent == ""
    assert record.paragraph == (
        'An archaic collective noun for a group of jackdaws is a "clattering". '
        'Another name for a flock is a "train".'
    )
    assert record.label == 1


# -- HTTP wire contract ----------------------------------------------------------

CANNED_TEXT = (
    "Opening sentence carries a citation already.<ref>a</ref> "
    "Second sentence stands without any support. "
    "Third sentence also stands without support."
)


def test_score_endpoint_key_order_and_byte_stability():
    """Response keys match the published order; repeat calls are byte-identical."""
    rev = RawRevision(
        lang="en", rev_id=1242378206, page_id=77, page_title="Canned", wikitext=CANNED_TEXT
    )
    session = FakeSession([FakeResponse(api_payload(rev))])
    app = create_app(
        classifier=stub_classifier(seed=7), client=MediaWikiClient(session=session)
    )

    with TestClient(app) as client:
        first = client.post("/v1/score", json={"rev_id": 1242378206, "lang": "en"})
        second = client.post("/v1/score", json={"rev_id": 1242378206, "lang": "en"})

    assert first.status_code == 200
    keys = json.loads(first.content, object_pairs_hook=lambda pairs: [k for k, _ in pairs])
    assert keys == ["model_name", "model_version", "wiki_db", "revision_id", "reference_need_score"]
    assert first.content == second.content


# -- evaluation oracles ----------------------------------------------------------


def pair_counting_auc(labels: list[int], scores: list[float]) -> float:
    positives = [s for y, s in zip(labels, scores) if y == 1]
    negatives = [s for y, s in zip(labels, scores) if y == 0]
    total = 0.0
    for p in positives:
        for q in negatives:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(positives) * len(negatives))


def random_labels_scores(rng: np.random.Generator, max_n: int = 50):
    while True:
        n = int(rng.integers(2, max_n + 1))
        labels = rng.integers(0, 2, size=n)
        if 0 < labels.sum() < n:
            break
    # coarse score grid forces plenty of exact ties
    scores = rng.integers(0, 8, size=n) / 7.0
    return labels.tolist(), scores.tolist()


def test_auc_and_threshold_metrics_match_counting_oracles():
    """Rank AUC equals brute-force pair counting; metrics equal hand counts."""
    rng = np.random.default_rng(31)
    for _ in range(500):
        labels, scores = random_labels_scores(rng)
        assert auc_roc(labels, scores) == pair_counting_auc(labels, scores)

    for _ in range(100):
        labels, _ = random_labels_scores(rng)
        preds = rng.integers(0, 2, size=len(labels)).tolist()
        tp = sum(1 for y, p in zip(labels, preds) if y == 1 and p == 1)
        fp = sum(1 for y, p in zip(labels, preds) if y == 0 and p == 1)
        fn = sum(1 for y, p in zip(labels, preds) if y == 1 and p == 0)
        tn = sum(1 for y, p in zip(labels, preds) if y == 0 and p == 0)
        m = binary_metrics(labels, preds)
        assert m.accuracy == (tp + tn) / len(labels)
        assert m.precision == (tp / (tp + fp) if tp + fp else 0.0)
        assert m.recall == (tp / (tp + fn) if tp + fn else 0.0)
        assert m.f1 == (2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else 0.0)

    labels, scores = random_labels_scores(rng, max_n=40)
    assert bootstrap_auc(labels, scores, n_boot=200, seed=5) == bootstrap_auc(
        labels, scores, n_boot=200, seed=5
    )

    hits = 0
    for i in range(200):
        while True:
            n = int(rng.integers(20, 81))
            labels = rng.integers(0, 2, size=n)
            if 0 < labels.sum() < n:
                break
        scores = rng.random(size=n)
        point = auc_roc(labels, scores)
        center, band = bootstrap_auc(labels.tolist(), scores.tolist(), n_boot=200, seed=i)
        if center - band <= point <= center + band:
            hits += 1
    assert hits >= 190


# -- latency ---------------------------------------------------------------------


def scoring_batch(n: int) -> list[SentenceRecord]:
    return [
        make_record(
            f"Benchmark sentence number {i} carries enough words to score.",
            page_id=i + 1,
        )
        for i in range(n)
    ]


def test_stub_scoring_mean_latency_under_one_millisecond():
    classifier = stub_classifier(seed=3)
    batch = scoring_batch(16)
    classifier.score_records(batch)
    stats = bench(lambda: classifier.score_records(batch), repeats=50, warmup=5)
    acceptance_notes.append(f"stub mean latency {stats.mean * 1e6:.0f} us")
    assert stats.mean < 1e-3


@pytest.fixture(scope="module")
def latency_bundles(tmp_path_factory):
    """Float and dynamically quantized exports of the same traced model."""
    float_dir = os.environ.get("REFNEED_BENCH_BUNDLE_FLOAT")
    quant_dir = os.environ.get("REFNEED_BENCH_BUNDLE_QUANT")
    if float_dir and quant_dir:
        return Path(float_dir), Path(quant_dir)

    torch = pytest.importorskip("torch")
    from tokenizers import Tokenizer, models, pre_tokenizers, trainers

    tok = Tokenizer(models.WordPiece(unk_token="[UNK]"))
    tok.pre_tokenizer = pre_tokenizers.Whitespace()
    trainer = trainers.WordPieceTrainer(
        vocab_size=400, special_tokens=["[PAD]", "[UNK]", "[CLS]", "[SEP]"]
    )
    tok.train_from_iterator(
        ["benchmark sentence number carries enough words to score", "en history"],
        trainer,
    )

    class WideScorer(torch.nn.Module):
        def __init__(self):
            super().__init__()
            torch.manual_seed(5)
            self.emb = torch.nn.Embedding(512, 768, padding_idx=0)
            self.stack = torch.nn.ModuleList(
                [torch.nn.Linear(768, 768) for _ in range(6)]
            )
            self.head = torch.nn.Linear(768, 2)

        def forward(self, input_ids, attention_mask):
            x = self.emb(input_ids)
            for layer in self.stack:
                x = torch.relu(layer(x))
            mask = attention_mask.unsqueeze(-1).to(x.dtype)
            pooled = (x * mask).sum(dim=1) / mask.sum(dim=1).clamp(min=1.0)
            return self.head(pooled)

    meta = json.dumps(
        {
            "model_version": 0,
            "max_seq_len": 128,
            "classes": list(CLASSES),
            "feature_template": FEATURE_TEMPLATE,
        }
    )
    example = (
        torch.ones(2, 24, dtype=torch.int64),
        torch.ones(2, 24, dtype=torch.int64),
    )

    def export(model, name):
        root = tmp_path_factory.mktemp(name)
        with torch.inference_mode():
            torch.jit.trace(model, example).save(str(root / "model.pt"))
        tok.save(str(root / "tokenizer.json"))
        (root / "meta.json").write_text(meta, encoding="utf-8")
        return root

    model = WideScorer().eval()
    float_root = export(model, "float_bundle")
    quantized = torch.ao.quantization.quantize_dynamic(
        model, {torch.nn.Linear}, dtype=torch.qint8
    )
    quant_root = export(quantized, "quant_bundle")
    return float_root, quant_root


def test_quantized_bundle_mean_latency_not_above_float(latency_bundles):
    """On four threads the int8 export must not run slower than the float one."""
    float_root, quant_root = latency_bundles
    float_clf = load_bundle(float_root, threads=4)
    quant_clf = load_bundle(quant_root, threads=4)
    batch = scoring_batch(32)

    float_stats = bench(lambda: float_clf.score_records(batch), repeats=15, warmup=3)
    quant_stats = bench(lambda: quant_clf.score_records(batch), repeats=15, warmup=3)
    acceptance_notes.append(
        f"bundle mean latency float {float_stats.mean * 1e3:.2f} ms, "
        f"int8 {quant_stats.mean * 1e3:.2f} ms"
    )
    assert quant_stats.mean <= float_stats.mean


# -- splitting, sampling, serialization -------------------------------------------

WIKIS = ("enwiki", "frwiki", "dewiki", "jawiki")

TEXT_POOLS = (
    (0x0020, 0x007E),
    (0x00A1, 0x00FF),
    (0x0400, 0x04FF),
    (0x0600, 0x06FF),
    (0x3040, 0x30FF),
    (0x4E00, 0x4FFF),
    (0x2018, 0x201F),
    (0x1F300, 0x1F5FF),
)


def random_text(rng: np.random.Generator, max_len: int = 40) -> str:
    chars = []
    for _ in range(int(rng.integers(1, max_len))):
        if rng.random() < 0.05:
            chars.append(rng.choice(['"', "\\", "\n", "\t"]))
        else:
            lo, hi = TEXT_POOLS[int(rng.integers(0, len(TEXT_POOLS)))]
            chars.append(chr(int(rng.integers(lo, hi + 1))))
    return "".join(chars)


def test_splits_disjoint_samples_balanced_round_trip():
    """Splits never share a page, samples are exactly half positive, and
    records survive the wire format unchanged."""
    rng = np.random.default_rng(13)
    for trial in range(100):
        records = []
        for _ in range(int(rng.integers(1, 31))):
            wiki = WIKIS[int(rng.integers(0, len(WIKIS)))]
            page = int(rng.integers(1, 400))
            for k in range(int(rng.integers(1, 5))):
                records.append(
                    make_record(
                        f"Sentence {k} of page {page} reads well enough.",
                        wiki_db=wiki,
                        page_id=page,
                    )
                )
        parts = split_by_page(records, seed=trial)
        assert sum(len(p) for p in parts) == len(records)
        page_sets = [{(r.wiki_db, r.page_id) for r in part} for part in parts]
        for i in range(len(page_sets)):
            for j in range(i + 1, len(page_sets)):
                assert not page_sets[i] & page_sets[j]

    pool = []
    for wiki in WIKIS:
        for i in range(40):
            pool.append(
                make_record(
                    f"Labeled sentence {i} for {wiki} fills the pool.",
                    wiki_db=wiki,
                    page_id=i + 1,
                    label=int(i % 2 == 0),
                )
            )
    sample = balanced_sample(pool, per_language=10, seed=4)
    for wiki in WIKIS:
        chosen = [r for r in sample if r.wiki_db == wiki]
        assert len(chosen) == 10
        assert sum(r.label for r in chosen) == 5

    for i in range(1000):
        record = SentenceRecord(
            wiki_db=WIKIS[i % len(WIKIS)],
            page_id=int(rng.integers(1, 10**9)),
            page_title=random_text(rng),
            revision_id=int(rng.integers(1, 10**12)),
            section_name=random_text(rng),
            sentence=random_text(rng, max_len=120),
            next_sent=random_text(rng),
            prev_sent=random_text(rng),
            paragraph=random_text(rng, max_len=200),
            label=int(rng.integers(0, 2)),
        )
        assert from_jsonl_line(to_jsonl_line(record)) == record


# -- yes/no prompt scoring ---------------------------------------------------------


def test_yes_no_scoring_and_replay_auc(replay_table):
    """Equal logprobs score 0.5; the shipped replay fixture's AUC matches
    brute-force pair counting."""
    for lp in (-3.0, -1.0, -0.25, 0.0):
        assert verbalizer_score(lp, lp) == 0.5
    assert abs(verbalizer_score(-0.5, -1.5) - 0.7311) < 1e-4

    client = ReplayVerbalizerClient.from_json(REPLAY_FIXTURE)
    sentences = list(replay_table)
    features = [
        SentenceFeatures(
            lang="en", section_title="history", sentence=s, next_sent="", prev_sent=""
        )
        for s in sentences
    ]
    scores = verbalize_scores(client, features)
    labels = [replay_table[s]["label"] for s in sentences]
    assert auc_roc(labels, scores.tolist()) == pair_counting_auc(labels, scores.tolist())
