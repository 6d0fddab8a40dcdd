"""Provider abstraction and the concept/thesis reasoning stages."""

from sellside.agents.orchestration import (
    BENCHMARK_METRICS,
    DEFAULT_QUESTIONS,
    CompetitorBenchmark,
    Insight,
    InsightKind,
    Question,
    ThesisContent,
    answer_financial_query,
    benchmark_competitors,
    display_metric,
    load_question_bank,
    metric_context,
    run_concept_cot,
    run_thesis_cot,
    verify_insight_refs,
)
from sellside.agents.providers import (
    CountingProvider,
    HttpChatProvider,
    HttpProviderConfig,
    LlmProvider,
    PromptEnvelope,
    RecordingProvider,
    ReplayProvider,
    ScriptedProvider,
    TemplateMockProvider,
)

__all__ = [
    "BENCHMARK_METRICS",
    "DEFAULT_QUESTIONS",
    "CompetitorBenchmark",
    "CountingProvider",
    "HttpChatProvider",
    "HttpProviderConfig",
    "Insight",
    "InsightKind",
    "LlmProvider",
    "PromptEnvelope",
    "Question",
    "RecordingProvider",
    "ReplayProvider",
    "ScriptedProvider",
    "TemplateMockProvider",
    "ThesisContent",
    "answer_financial_query",
    "benchmark_competitors",
    "display_metric",
    "load_question_bank",
    "metric_context",
    "run_concept_cot",
    "run_thesis_cot",
    "verify_insight_refs",
]
