"""Judge-based report scoring, aggregation, and the stability harness."""

from sellside.evaluation.judge import (
    DIMENSIONS,
    Aggregate,
    Dimension,
    EvaluationScore,
    Rubric,
    aggregate_samples,
    aggregate_scores,
    build_dimension_prompt,
    build_judge_prompt,
    evaluate_report,
    format_judge_response,
    load_default_rubric,
    parse_judge_response,
)
from sellside.evaluation.stability import (
    DEFAULT_STRATEGIES,
    GenerationStrategy,
    StabilityResult,
    render_aggregate_table,
    render_histogram,
    render_samples_table,
    run_stability,
)

__all__ = [
    "DEFAULT_STRATEGIES",
    "DIMENSIONS",
    "Aggregate",
    "Dimension",
    "EvaluationScore",
    "GenerationStrategy",
    "Rubric",
    "StabilityResult",
    "aggregate_samples",
    "aggregate_scores",
    "build_dimension_prompt",
    "build_judge_prompt",
    "evaluate_report",
    "format_judge_response",
    "load_default_rubric",
    "parse_judge_response",
    "render_aggregate_table",
    "render_histogram",
    "render_samples_table",
    "run_stability",
]
