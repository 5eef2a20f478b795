from .records import EVENT_KINDS, CustomerEvent, EventLog, LeadRecord, transcript_from_events
from .features import (
    CATEGORICAL_VALUES,
    FEATURE_CATEGORY,
    FEATURE_NAMES,
    FEATURE_SCHEMA,
    SENTINEL,
    assign_label,
    compute_tabular,
)
from .generator import (
    GeneratorConfig,
    SyntheticCorpus,
    calibrate_intercept,
    generate_corpus,
    iter_lead_bundles,
)
from .corpus_io import (
    SCHEMA_VERSION,
    corpus_header,
    read_corpus,
    read_corpus_with_header,
    read_events,
    write_corpus,
    write_events,
)
