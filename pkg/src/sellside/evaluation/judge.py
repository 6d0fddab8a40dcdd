"""Scoring reports with a model judge: prompt build, response parse, aggregation.

The judge prompt asks for three dimensions — accuracy, logicality,
storytelling — each scored 0 to 10, and pins an explicit answer format.
The parser accepts both response grammars seen in practice:
``[Accuracy] Score: 9`` and ``[Accuracy] 9: comment...``. Scores outside
the scale are rejected, never clamped.
"""

from __future__ import annotations

import hashlib
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from sellside.agents.providers import LlmProvider, PromptEnvelope
from sellside.errors import EmptyInput, MalformedResponse, OutOfRangeScore


class Dimension(str, Enum):
    ACCURACY = "accuracy"
    LOGICALITY = "logicality"
    STORYTELLING = "storytelling"


DIMENSIONS = (Dimension.ACCURACY, Dimension.LOGICALITY, Dimension.STORYTELLING)

# Wording of the per-dimension focus used by targeted single-dimension prompts.
_DIMENSION_FOCUS = {
    Dimension.ACCURACY: ("factual accuracy", "perfect accuracy"),
    Dimension.LOGICALITY: ("logical coherence", "flawless coherence"),
    Dimension.STORYTELLING: ("storytelling ability", "flawless storytelling"),
}


@dataclass(frozen=True)
class Rubric:
    """Criterion text for every integer score level of every dimension."""

    levels: dict[Dimension, dict[int, str]]

    def __post_init__(self) -> None:
        for dimension in DIMENSIONS:
            got = sorted(self.levels.get(dimension, {}))
            if got != list(range(11)):
                raise ValueError(f"rubric for {dimension.value} must cover scores 0..10, got {got}")

    def lines(self) -> list[str]:
        out = []
        for dimension in DIMENSIONS:
            for score in range(10, -1, -1):
                out.append(f"{dimension.value} {score}: {self.levels[dimension][score]}")
        return out


def load_default_rubric() -> Rubric:
    raw = resources.files("sellside.evaluation").joinpath("data/rubric.tsv").read_text("utf-8")
    levels: dict[Dimension, dict[int, str]] = {d: {} for d in DIMENSIONS}
    for line in raw.splitlines():
        if not line.strip():
            continue
        dimension, score, text = line.split("\t", 2)
        levels[Dimension(dimension)][int(score)] = text
    return Rubric(levels)


@dataclass
class EvaluationScore:
    accuracy: float
    logicality: float
    storytelling: float
    comments: dict[str, str] = field(default_factory=dict)
    judge: str = ""
    report_id: str = ""

    def __post_init__(self) -> None:
        for dimension in DIMENSIONS:
            value = self.get(dimension)
            if not 0.0 <= value <= 10.0:
                raise OutOfRangeScore(f"{dimension.value} score {value} outside [0, 10]")

    def get(self, dimension: Dimension) -> float:
        return getattr(self, dimension.value)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "logicality": self.logicality,
            "storytelling": self.storytelling,
            "comments": dict(self.comments),
            "judge": self.judge,
            "report_id": self.report_id,
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvaluationScore:
        return cls(
            accuracy=d["accuracy"],
            logicality=d["logicality"],
            storytelling=d["storytelling"],
            comments=dict(d.get("comments", {})),
            judge=d.get("judge", ""),
            report_id=d.get("report_id", ""),
        )


# ── prompt construction ──────────────────────────────────────────────────

_ANSWER_FORMAT = (
    "[Accuracy] Score:\n1. ...\n\n[Logicality] Score:\n1. ...\n\n[Storytelling] Score:\n1. ..."
)

_DEFINITIONS = (
    "a. Accuracy: Assess how accurate the information in the report is, focusing on the"
    " precision of financial data, adherence to known facts, and the overall credibility of"
    " the presented analysis. Provide a score from 0 to 10, with 10 being extremely accurate.\n"
    "b. Logicality: Evaluate the report's logical structure, looking at the clarity of the"
    " flow from one section to the next, the coherence of arguments, and the logical"
    " progression of financial analysis. Provide a score from 0 to 10, with 10 representing"
    " a perfectly logical and well-organized report.\n"
    "c. Storytelling Ability: Judge the storytelling aspect, considering whether the report"
    " is engaging, provides meaningful context, and effectively communicates the importance"
    " of financial data in an insightful manner. Provide a score from 0 to 10, with 10 being"
    " highly engaging and insightful."
)


def build_judge_prompt(report_text: str, rubric: Rubric) -> PromptEnvelope:
    """Three-dimension scoring prompt with the report as a context block."""
    if not report_text.strip():
        raise ValueError("report_text must be non-empty")
    system = (
        "Instruction: You are an experienced financial analyst. Your task is to evaluate the"
        " equity research report supplied as context on three specific dimensions: accuracy,"
        " logicality, and storytelling ability.\n"
        "Your answer format should be as follows:\n\n"
        f"{_ANSWER_FORMAT}\n\n"
        "Information:\n"
        f"{_DEFINITIONS}\n\n"
        "Scoring guide:\n" + "\n".join(rubric.lines())
    )
    return PromptEnvelope(
        system_text=system,
        user_text="Score the report in the required format.",
        context_blocks=(("report", report_text),),
    )


def build_dimension_prompt(
    report_text: str, dimension: Dimension, rubric: Rubric
) -> PromptEnvelope:
    """Targeted single-dimension prompt used by the stability harness."""
    if not report_text.strip():
        raise ValueError("report_text must be non-empty")
    focus, ideal = _DIMENSION_FOCUS[dimension]
    system = (
        f"Evaluate the report based on {focus} and assign a score from 0 to 10, with 10"
        f" representing {ideal}.\n"
        f"Answer in the form: [{dimension.value.title()}] <score>: <justification>\n\n"
        "Scoring guide:\n"
        + "\n".join(
            f"{s}: {rubric.levels[dimension][s]}" for s in range(10, -1, -1)
        )
    )
    return PromptEnvelope(
        system_text=system,
        user_text=f"Score the report's {dimension.value}.",
        context_blocks=(("report", report_text),),
    )


# ── response parsing ─────────────────────────────────────────────────────

_HEADER = re.compile(
    r"\[\s*(accuracy|logicality|storytelling)\s*\]\s*(?:score\s*:?\s*)?(\d+(?:\.\d+)?)\s*:?",
    re.IGNORECASE,
)


def parse_judge_response(text: str) -> EvaluationScore:
    """Extract the three scores and per-dimension comments.

    Accepts ``[Accuracy] 9: ...`` and ``[Accuracy] Score: 9 ...`` headers.
    The comment for a dimension is everything up to the next header.
    """
    found: dict[Dimension, tuple[float, str]] = {}
    matches = list(_HEADER.finditer(text))
    for i, match in enumerate(matches):
        dimension = Dimension(match.group(1).lower())
        score = float(match.group(2))
        if score > 10.0:
            raise OutOfRangeScore(f"{dimension.value} score {score:g} outside [0, 10]")
        end = matches[i + 1].start() if i + 1 < len(matches) else len(text)
        comment = text[match.end() : end].strip()
        if dimension not in found:
            found[dimension] = (score, comment)
    for dimension in DIMENSIONS:
        if dimension not in found:
            raise MalformedResponse(dimension.value)
    return EvaluationScore(
        accuracy=found[Dimension.ACCURACY][0],
        logicality=found[Dimension.LOGICALITY][0],
        storytelling=found[Dimension.STORYTELLING][0],
        comments={d.value: found[d][1] for d in DIMENSIONS},
    )


def format_judge_response(score: EvaluationScore) -> str:
    """Render a score back into the bracket-header response layout."""
    blocks = []
    for dimension in DIMENSIONS:
        value = score.get(dimension)
        blocks.append(
            f"[{dimension.value.title()}] {value:g}:\n{score.comments.get(dimension.value, '')}"
        )
    return "\n\n".join(blocks)


def evaluate_report(report_text: str, provider: LlmProvider, rubric: Rubric | None = None) -> EvaluationScore:
    """Judge a rendered report with the three-dimension prompt."""
    rubric = rubric or load_default_rubric()
    envelope = build_judge_prompt(report_text, rubric)
    score = parse_judge_response(provider.complete(envelope))
    score.judge = provider.name
    score.report_id = hashlib.sha256(report_text.encode("utf-8")).hexdigest()[:16]
    return score


# ── aggregation ──────────────────────────────────────────────────────────


@dataclass(frozen=True)
class Aggregate:
    mean: float
    std: float
    min: float
    max: float
    n: int


def aggregate_scores(scores: list[EvaluationScore]) -> dict[Dimension, Aggregate]:
    """Per-dimension mean, population standard deviation, min, and max.

    Sums use ``math.fsum`` so the result is independent of input ordering.
    """
    if not scores:
        raise EmptyInput("no scores to aggregate")
    out: dict[Dimension, Aggregate] = {}
    for dimension in DIMENSIONS:
        values = [s.get(dimension) for s in scores]
        out[dimension] = aggregate_samples(values)
    return out


def aggregate_samples(values: list[float]) -> Aggregate:
    if not values:
        raise EmptyInput("no samples to aggregate")
    n = len(values)
    mean = math.fsum(values) / n
    std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / n)
    return Aggregate(mean=mean, std=std, min=min(values), max=max(values), n=n)
