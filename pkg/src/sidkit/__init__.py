"""sidkit: tooling for dialectal slot-and-intent detection experiments."""

__version__ = "0.1.0"

from .corpus import (  # noqa: F401
    BioViolation,
    Dataset,
    FormatOptions,
    Span,
    Utterance,
    extract_spans,
    label_inventory,
    load_dataset,
    parse_dataset,
    save_dataset,
    spans_to_tags,
    split_dataset,
    unseen_label_report,
    validate_bio,
    write_dataset,
)
from .correlation import correlate, pearson, spearman  # noqa: F401
from .evaluate import PRF, EvalReport, evaluate, intent_accuracy, span_f1  # noqa: F401
from .noise import Alphabet, NoiseConfig, OpWeights, build_alphabet, noise_dataset, noise_word  # noqa: F401
from .normalize import RuleTrace, normalize_text, normalize_token, trace_token  # noqa: F401
from .subword import SubwordVocab, ratio_difference, split_word_ratio, tokenize_word  # noqa: F401
from .surgery import (  # noqa: F401
    CheckpointIndex,
    MavReport,
    NamingScheme,
    layer_group,
    mav_report,
    read_checkpoint,
    revert_layers,
    swap_layers,
    write_checkpoint,
)
