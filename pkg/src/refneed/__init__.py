"""Multilingual reference need scoring for wiki articles.

The package turns a revision of a wiki page into a single score: the share
of its sentences that need a citation but lack one. It covers the whole
path from raw wikitext to the serving API, plus the corpus machinery used
to train and evaluate the underlying sentence classifier.
"""

from .classifier import (
    CLASSES,
    FEATURE_TEMPLATE,
    HashBackend,
    HashTokenizer,
    ReferenceNeedClassifier,
    SentenceFeatures,
    SubwordTokenizer,
    TorchScriptBackend,
    encode,
    encode_batch,
    load_bundle,
    stub_classifier,
)
from .dataset import (
    FIELD_ORDER,
    SentenceRecord,
    balanced_sample,
    filter_records,
    from_jsonl_line,
    read_jsonl,
    records_from_document,
    split_by_page,
    to_jsonl_line,
    write_jsonl,
)
from .errors import RefNeedError
from .evaluation import (
    auc_roc,
    bench,
    binary_metrics,
    bootstrap_auc,
    confusion_matrix,
    evaluate_scores,
    per_group_confusion,
)
from .langconfig import LangConfig, get_config, supported_languages
from .pipeline import (
    MediaWikiClient,
    ScoreResult,
    build_corpus,
    compute_rn,
    score_document,
    score_online,
    score_revision,
)
from .sentences import LabeledSentence, assign_labels, extract_sentences, segment
from .service import create_app
from .verbalizer import (
    PROMPT_TEMPLATE,
    HTTPVerbalizerClient,
    ReplayVerbalizerClient,
    render_prompt,
    verbalizer_score,
)
from .wikitext import (
    ParsedDocument,
    Paragraph,
    RawRevision,
    RefAnchor,
    Section,
    detect_featured,
    is_excluded_section,
    parse_document,
)

__version__ = "0.1.0"
