from .featurize import (
    CATEGORICAL_FEATURES,
    DENSE_FEATURES,
    FeatureStats,
    cardinalities,
    featurize,
    fit_stats,
)
from .models import (
    BASELINE_KINDS,
    BaselineConfig,
    BaselineModel,
    evaluate_baseline,
    init_baseline,
    train_baseline,
)
