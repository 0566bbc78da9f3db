"""JSON Schemas (draft 2020-12) for the documents the command line writes."""

_NUMBER_OR_NULL = {"type": ["number", "null"]}

GA_TRACE = {
    "type": "array",
    "items": {
        "type": "object",
        "required": ["fold", "generations"],
        "properties": {
            "fold": {"type": "integer", "minimum": 0},
            "generations": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["generation", "best_rmsecv", "best_mask"],
                    "properties": {
                        "generation": {"type": "integer", "minimum": 0},
                        "best_rmsecv": {"type": "number", "minimum": 0},
                        "best_mask": {"type": "array", "items": {"type": "integer", "minimum": 0}},
                    },
                },
            },
        },
    },
}

EVAL_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "EvalReport",
    "type": "object",
    "required": ["strategy", "folds", "seed", "per_fold_rmse", "rmsecv", "r2_mean", "std", "closeness_pct"],
    "additionalProperties": False,
    "properties": {
        "strategy": {"type": "string"},
        "folds": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer"},
        "per_fold_rmse": {"type": "array", "items": {"type": "number", "minimum": 0}},
        "rmsecv": {"type": "number", "minimum": 0},
        "r2_mean": _NUMBER_OR_NULL,
        "std": {"type": "number", "minimum": 0},
        "closeness_pct": _NUMBER_OR_NULL,
        "ga_trace": GA_TRACE,
        "nn_loss_trace": {"type": "array", "items": {"type": "array", "items": {"type": "number"}}},
    },
}

COMPARISON = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "Comparison",
    "type": "object",
    "required": ["folds", "seed", "rows"],
    "properties": {
        "folds": {"type": "integer", "minimum": 2},
        "seed": {"type": "integer"},
        "rows": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["strategy", "rmsecv", "r2_mean", "closeness_pct", "error"],
                "properties": {
                    "strategy": {"type": "string"},
                    "rmsecv": _NUMBER_OR_NULL,
                    "r2_mean": _NUMBER_OR_NULL,
                    "closeness_pct": _NUMBER_OR_NULL,
                    "error": {"type": ["string", "null"]},
                },
            },
        },
    },
}

_PAIR_KEYS = ["low-mid", "low-high", "mid-high"]
_GROUP_KEYS = ["low", "mid", "high"]

SIMILARITY_REPORT = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "SimilarityReport",
    "type": "object",
    "required": ["t1", "t2", "group_sizes", "valid_dims", "n_dims", "between_pct", "within_pct",
                 "repeats", "seed", "draw_size", "n_subgroups", "warnings"],
    "properties": {
        "t1": {"type": "number"},
        "t2": {"type": "number"},
        "group_sizes": {
            "type": "object",
            "required": _GROUP_KEYS,
            "additionalProperties": {"type": "integer", "minimum": 0},
        },
        "valid_dims": {"type": "integer", "minimum": 0},
        "n_dims": {"type": "integer", "minimum": 1},
        "between_pct": {"type": "object", "required": _PAIR_KEYS, "additionalProperties": _NUMBER_OR_NULL},
        "within_pct": {"type": "object", "required": _GROUP_KEYS, "additionalProperties": _NUMBER_OR_NULL},
        "repeats": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer"},
        "draw_size": {"type": "integer", "minimum": 2},
        "n_subgroups": {"type": "integer", "minimum": 2},
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}

SCHEMAS = {
    "report": EVAL_REPORT,
    "compare": COMPARISON,
    "anova": SIMILARITY_REPORT,
}
