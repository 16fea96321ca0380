"""Synthetic question corpus for training the manager's models.

Template-filled questions in three classes: data-presenter, insight, and
out-of-domain. Defaults mirror a desk-scale split (120 presenter, 59
insight, 123 out-of-domain). The paraphrase-based super-sampler enlarges a
class to a target size through the completion-provider contract, so it can
run against a real model or the deterministic built-in paraphraser.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Optional

from .core import seeded_rng
from .errors import InsufficientVariation
from .llm import CompletionRequest, LlmProvider, load_template, render

LABEL_PRESENTER = "presenter"
LABEL_INSIGHT = "insight"
LABEL_OOD = "ood"

DEFAULT_COUNTS = {LABEL_PRESENTER: 120, LABEL_INSIGHT: 59, LABEL_OOD: 123}


@dataclass(frozen=True)
class CorpusQuestion:
    text: str
    label: str


_METRICS = ("sales", "revenue", "units sold", "page views", "traffic", "conversion rate")
_PERIODS = (
    "last week",
    "this week",
    "last month",
    "this month",
    "last year",
    "this year",
    "in August 2024",
    "over the past quarter",
)
_SCOPES = ("my top 5 products", "my top 10 products", "all my products", "my best sellers")
_KS = ("3", "5", "10", "20")

_PRESENTER_FORMS = (
    "what were my {metric} for {scope} {period}",
    "show me {metric} for {scope} {period}",
    "what were my {metric} {period}",
    "how did my {metric} change {period} compared to a year earlier",
    "top {k} products by {metric} {period}",
    "which products had the highest {metric} {period}",
    "give me a breakdown of {metric} by product {period}",
    "list my monthly {metric} {period}",
)

_INSIGHT_FORMS = (
    "how does my business perform",
    "how is my business doing",
    "how is my business doing with respect to my benchmarks",
    "how am I doing compared to my benchmarks",
    "why did my {metric} drop {period}",
    "summarize my business performance {period}",
    "what trends do you see in my {metric}",
    "is my {metric} seasonal",
    "give me insights about my {metric}",
    "what is driving changes in my {metric}",
)

_CITIES = (
    "Tokyo", "Paris", "Lima", "Oslo", "Cairo", "Sydney",
    "Toronto", "Mumbai", "Berlin", "Seoul", "Bogota", "Dublin",
)
_THINGS = (
    "the ocean", "autumn", "my cat", "a dragon", "friendship",
    "the moon", "rainy mornings", "an old lighthouse", "chess", "gardens",
)
_DISHES = (
    "ramen", "lasagna", "tacos", "paella", "pancakes",
    "curry", "dumplings", "falafel", "goulash", "risotto",
)
_EVENTS = (
    "world cup", "super bowl", "olympics 100m final",
    "chess championship", "tour de france", "snooker final",
)
_WORDS = (
    "hello", "thank you", "good morning", "goodbye",
    "congratulations", "see you tomorrow", "happy birthday", "welcome",
)
_LANGUAGES = ("French", "Japanese", "Spanish", "German", "Italian", "Korean")
_DEVICES = (
    "printer", "wifi router", "laptop", "phone",
    "dishwasher", "thermostat", "smart watch", "coffee machine",
)
_CONCEPTS = (
    "life", "entropy", "irony", "justice",
    "serendipity", "nostalgia", "momentum", "harmony",
)
_COUNTRIES = (
    "Peru", "Norway", "Kenya", "Vietnam", "Iceland",
    "Morocco", "Uruguay", "Nepal", "Finland", "Jordan",
)

_OOD_FORMS = (
    "what's the weather in {city}",
    "write me a poem about {thing}",
    "give me a recipe for {dish}",
    "who won the {event}",
    "translate {word} into {language}",
    "what is the capital of {country}",
    "help me fix my {device}",
    "tell me a joke about {thing}",
    "book me a flight to {city}",
    "what is the meaning of {concept}",
    "write a short story about {thing}",
    "what time is it in {city}",
    "how do I learn {language}",
    "recommend a movie about {thing}",
)

_SLOT_POOLS = {
    "metric": _METRICS,
    "period": _PERIODS,
    "scope": _SCOPES,
    "k": _KS,
    "city": _CITIES,
    "thing": _THINGS,
    "dish": _DISHES,
    "event": _EVENTS,
    "word": _WORDS,
    "language": _LANGUAGES,
    "device": _DEVICES,
    "concept": _CONCEPTS,
    "country": _COUNTRIES,
}

_SLOT_RE = re.compile(r"\{([a-z_]+)\}")


def _fill(form: str, rng) -> str:
    def sub(match):
        pool = _SLOT_POOLS[match.group(1)]
        return pool[int(rng.integers(0, len(pool)))]

    return _SLOT_RE.sub(sub, form)


def _generate_class(label: str, forms: tuple[str, ...], count: int, seed: int) -> list[CorpusQuestion]:
    rng = seeded_rng(seed, f"corpus-{label}")
    seen: set[str] = set()
    out: list[CorpusQuestion] = []
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > count * 200:
            raise InsufficientVariation(
                f"cannot generate {count} unique {label} questions from the templates"
            )
        form = forms[int(rng.integers(0, len(forms)))]
        text = _fill(form, rng)
        key = text.lower()
        if key in seen:
            continue
        seen.add(key)
        out.append(CorpusQuestion(text=text, label=label))
    return out


def generate_corpus(seed: int, counts: Optional[dict[str, int]] = None) -> list[CorpusQuestion]:
    """Deterministic labeled corpus; class sizes are independent knobs.

    Note the defaults: 120 presenter plus 59 insight in-domain questions and
    123 out-of-domain, kept as separate counts rather than forced to a
    round total.
    """
    counts = {**DEFAULT_COUNTS, **(counts or {})}
    for label, count in counts.items():
        if count < 1:
            raise ValueError(f"count for {label!r} must be >= 1")
    corpus: list[CorpusQuestion] = []
    corpus += _generate_class(LABEL_PRESENTER, _PRESENTER_FORMS, counts[LABEL_PRESENTER], seed)
    corpus += _generate_class(LABEL_INSIGHT, _INSIGHT_FORMS, counts[LABEL_INSIGHT], seed)
    corpus += _generate_class(LABEL_OOD, _OOD_FORMS, counts[LABEL_OOD], seed)
    return corpus


_MAX_CONSECUTIVE_DUPLICATES = 50


def supersample(
    llm: LlmProvider,
    questions: list[CorpusQuestion],
    target_per_class: int,
    timeout_s: Optional[float] = None,
) -> list[CorpusQuestion]:
    """Paraphrase each class up to the target size, rejecting duplicates.

    Duplicates are case-insensitive exact matches. A provider that keeps
    repeating itself trips InsufficientVariation instead of looping forever.
    """
    template = load_template("paraphrase")
    by_label: dict[str, list[CorpusQuestion]] = {}
    for q in questions:
        by_label.setdefault(q.label, []).append(q)

    out: list[CorpusQuestion] = []
    for label, members in by_label.items():
        if target_per_class < len(members):
            raise ValueError(
                f"target {target_per_class} below existing class size {len(members)}"
            )
        seen = {q.text.lower() for q in members}
        grown = list(members)
        index = 0
        consecutive_duplicates = 0
        while len(grown) < target_per_class:
            base = members[index % len(members)]
            prompt = render(
                template, {"question": base.text, "index": str(index + 1)}
            )
            reply = llm.complete(
                CompletionRequest(prompt=prompt), timeout_s=timeout_s
            ).strip()
            index += 1
            key = reply.lower()
            if not reply or key in seen:
                consecutive_duplicates += 1
                if consecutive_duplicates >= _MAX_CONSECUTIVE_DUPLICATES:
                    raise InsufficientVariation(
                        f"provider produced {consecutive_duplicates} duplicates in a "
                        f"row for class {label!r}"
                    )
                continue
            consecutive_duplicates = 0
            seen.add(key)
            grown.append(CorpusQuestion(text=reply, label=label))
        out += grown
    return out


_PARAPHRASE_PROMPT_RE = re.compile(r"Paraphrase #(\d+) of: (.+?)\n", re.DOTALL)

_PARA_PREFIXES = (
    "",
    "could you tell me ",
    "please show ",
    "I'd like to know ",
    "quick question: ",
    "help me understand ",
    "can you pull up ",
    "I want to see ",
    "walk me through ",
    "curious about this: ",
    "for my records, ",
    "as of today, ",
)

_PARA_SUFFIXES = (
    "",
    " please",
    " if you can",
    " right away",
    " when you get a chance",
    " in detail",
    " as a summary",
    " thanks",
)


class TemplateParaphraseProvider:
    """Deterministic paraphraser honoring the completion-provider contract.

    Variation k combines a prefix and a suffix indexed from k, so distinct
    variation numbers yield distinct wordings up to the combination budget;
    beyond it the provider repeats itself, which callers detect as
    insufficient variation.
    """

    def complete(self, req: CompletionRequest, timeout_s: Optional[float] = None) -> str:
        match = _PARAPHRASE_PROMPT_RE.search(req.prompt + "\n")
        if not match:
            raise ValueError("prompt is not a paraphrase request")
        k = int(match.group(1))
        question = match.group(2).strip().rstrip("?")
        prefix = _PARA_PREFIXES[k % len(_PARA_PREFIXES)]
        suffix = _PARA_SUFFIXES[(k // len(_PARA_PREFIXES)) % len(_PARA_SUFFIXES)]
        return f"{prefix}{question}{suffix}"


def save_corpus(questions: list[CorpusQuestion], path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for q in questions:
            f.write(json.dumps({"text": q.text, "label": q.label}) + "\n")


def load_corpus(path: str) -> list[CorpusQuestion]:
    out = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            out.append(CorpusQuestion(text=doc["text"], label=doc["label"]))
    return out
