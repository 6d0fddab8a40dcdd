"""Consistency assessment: generate the same report many times and score it.

Each registered method (the full pipeline plus three thin single-prompt
baselines: zero-shot, few-shot, plain chain-of-thought) generates ``n_runs``
reports on the same company. Every report is scored with one targeted
prompt per dimension, the three responses are persisted as one transcript
per run (which re-parses as a normal judge response), and per-dimension
samples are returned with derived aggregates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from sellside.agents.providers import LlmProvider, PromptEnvelope
from sellside.errors import GenerationFailure, JudgeFailure, SellsideError
from sellside.evaluation.judge import (
    DIMENSIONS,
    Aggregate,
    Dimension,
    Rubric,
    aggregate_samples,
    build_dimension_prompt,
    load_default_rubric,
    parse_judge_response,
)

# A generation strategy renders one report text for (config, provider, run_index).
GenerationStrategy = Callable[[object, LlmProvider, int], str]


@dataclass
class StabilityResult:
    method: str
    n_runs: int
    samples: dict[Dimension, list[float]] = field(default_factory=dict)

    def aggregate(self, dimension: Dimension) -> Aggregate:
        return aggregate_samples(self.samples[dimension])

    def mean(self, dimension: Dimension) -> float:
        return self.aggregate(dimension).mean

    def std(self, dimension: Dimension) -> float:
        return self.aggregate(dimension).std


def _single_prompt_strategy(style: str) -> GenerationStrategy:
    def generate(config, provider: LlmProvider, run_index: int) -> str:
        ticker = getattr(config, "ticker", str(config))
        if style == "zero_shot":
            user = f"Write an equity research report on {ticker}."
        elif style == "few_shot":
            user = (
                "Here is the skeleton of a strong equity research report: overview, thesis,"
                " projections, valuation, risks, competitor comparison, each grounded in"
                f" figures. Following that pattern, write an equity research report on {ticker}."
            )
        else:  # plain chain-of-thought
            user = (
                f"Write an equity research report on {ticker}. Think step by step: first the"
                " company's financial trajectory, then its valuation, then the risks, and"
                " conclude with a recommendation."
            )
        envelope = PromptEnvelope(
            system_text="You are an equity research analyst.",
            user_text=f"{user} (run {run_index})",
        )
        return provider.complete(envelope)

    return generate


def _pipeline_strategy(config, provider: LlmProvider, run_index: int) -> str:
    from sellside.pipeline import run_pipeline
    from sellside.report import render

    doc, _ = run_pipeline(config)
    return render(doc, "markdown").decode("utf-8")


DEFAULT_STRATEGIES: dict[str, GenerationStrategy] = {
    "pipeline": _pipeline_strategy,
    "zero_shot": _single_prompt_strategy("zero_shot"),
    "few_shot": _single_prompt_strategy("few_shot"),
    "plain_cot": _single_prompt_strategy("plain_cot"),
}


def run_stability(
    config,
    methods: list[str],
    n_runs: int,
    judge: LlmProvider,
    *,
    generator_provider: LlmProvider | None = None,
    strategies: dict[str, GenerationStrategy] | None = None,
    rubric: Rubric | None = None,
    transcript_dir: str | Path | None = None,
) -> list[StabilityResult]:
    """Generate and judge ``n_runs`` reports per method.

    Raw judge transcripts land under ``transcript_dir/<method>/<run>.txt``;
    each transcript is the three dimension responses joined with blank
    lines, so re-parsing it recovers the recorded scores.
    """
    if n_runs < 2:
        raise ValueError(f"n_runs must be >= 2, got {n_runs}")
    strategies = strategies if strategies is not None else DEFAULT_STRATEGIES
    rubric = rubric or load_default_rubric()
    generator = generator_provider or judge
    for method in methods:
        if method not in strategies:
            raise ValueError(f"no registered generation strategy for method {method!r}")

    results: list[StabilityResult] = []
    for method in methods:
        samples: dict[Dimension, list[float]] = {d: [] for d in DIMENSIONS}
        for run_index in range(1, n_runs + 1):
            try:
                report_text = strategies[method](config, generator, run_index)
            except SellsideError as exc:
                raise GenerationFailure(method, run_index, str(exc)) from exc
            blocks = []
            for dimension in DIMENSIONS:
                envelope = build_dimension_prompt(report_text, dimension, rubric)
                try:
                    blocks.append(judge.complete(envelope))
                except SellsideError as exc:
                    raise JudgeFailure(method, run_index, str(exc)) from exc
            transcript = "\n\n".join(blocks)
            try:
                score = parse_judge_response(transcript)
            except SellsideError as exc:
                raise JudgeFailure(method, run_index, str(exc)) from exc
            if transcript_dir is not None:
                path = Path(transcript_dir) / method / f"{run_index:03d}.txt"
                path.parent.mkdir(parents=True, exist_ok=True)
                path.write_text(transcript + "\n", "utf-8")
            for dimension in DIMENSIONS:
                samples[dimension].append(score.get(dimension))
        results.append(StabilityResult(method=method, n_runs=n_runs, samples=samples))
    return results


# ── text output ──────────────────────────────────────────────────────────


def render_samples_table(results: list[StabilityResult]) -> str:
    lines = ["method\tdimension\trun\tscore"]
    for result in results:
        for dimension in DIMENSIONS:
            for run_index, score in enumerate(result.samples[dimension], start=1):
                lines.append(f"{result.method}\t{dimension.value}\t{run_index}\t{score:g}")
    return "\n".join(lines) + "\n"


def render_aggregate_table(results: list[StabilityResult]) -> str:
    lines = ["method\tdimension\tmean\tstd\tmin\tmax\tn"]
    for result in results:
        for dimension in DIMENSIONS:
            agg = result.aggregate(dimension)
            lines.append(
                f"{result.method}\t{dimension.value}\t{agg.mean:.4f}\t{agg.std:.4f}"
                f"\t{agg.min:g}\t{agg.max:g}\t{agg.n}"
            )
    return "\n".join(lines) + "\n"


def render_histogram(results: list[StabilityResult], width: int = 40) -> str:
    """Half-point-bucket text histogram per (method, dimension)."""
    lines: list[str] = []
    for result in results:
        for dimension in DIMENSIONS:
            values = result.samples[dimension]
            counts: dict[float, int] = {}
            for value in values:
                bucket = math.floor(value * 2) / 2
                counts[bucket] = counts.get(bucket, 0) + 1
            peak = max(counts.values())
            lines.append(f"{result.method} / {dimension.value}")
            for bucket in sorted(counts):
                bar = "#" * max(1, round(counts[bucket] / peak * width))
                lines.append(f"  {bucket:5.1f} | {bar} ({counts[bucket]})")
    return "\n".join(lines) + "\n"
