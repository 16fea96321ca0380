from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from seller_insights.corpus import (
    CorpusQuestion,
    LABEL_INSIGHT,
    LABEL_OOD,
    LABEL_PRESENTER,
    TemplateParaphraseProvider,
    generate_corpus,
    load_corpus,
    save_corpus,
    supersample,
)
from seller_insights.errors import EmptyInput, InsufficientVariation, NoKeywords
from seller_insights.evalharness import (
    Annotation,
    BenchmarkItem,
    MetricReport,
    aggregate_stats,
    completeness,
    correctness,
    latency_percentile,
    load_annotations,
    load_benchmark,
    question_accuracy,
    relevance,
    save_benchmark,
)
from seller_insights.llm import CompletionRequest


def item(keywords=("sales", "august"), required=("x", "y")):
    return BenchmarkItem(
        id="i1", question="q", in_scope=True, keywords=keywords, required_insights=required
    )


def ann(addressed=(), total=0, correct=0, covered=0):
    return Annotation(
        item_id="i1",
        addressed_keywords=addressed,
        insights_in_response=total,
        correct_insights=correct,
        required_covered=covered,
    )


class TestRelevance:
    def test_three_of_four(self):
        it = item(keywords=("a", "b", "c", "d"))
        assert relevance(ann(addressed=("a", "b", "c")), it) == Fraction(3, 4)

    def test_zero(self):
        assert relevance(ann(), item()) == Fraction(0)

    def test_all(self):
        it = item(keywords=("a", "b"))
        assert relevance(ann(addressed=("a", "b")), it) == Fraction(1)

    def test_no_keywords_error(self):
        bare = BenchmarkItem(id="x", question="q", in_scope=False)
        with pytest.raises(NoKeywords):
            relevance(ann(), bare)


class TestCorrectness:
    def test_paper_minimum_is_attainable(self):
        # 5 of 11 insights correct.
        value = correctness(ann(total=11, correct=5))
        assert value == Fraction(5, 11)
        assert float(value) == pytest.approx(0.455, abs=5e-4)

    def test_all_correct(self):
        assert correctness(ann(total=3, correct=3)) == Fraction(1)

    def test_zero_insights_scores_zero(self):
        assert correctness(ann(total=0, correct=0)) == Fraction(0)


class TestCompleteness:
    def test_five_of_seven(self):
        it = item(required=tuple("abcdefg"))
        value = completeness(ann(covered=5), it)
        assert value == Fraction(5, 7)
        assert float(value) == pytest.approx(0.714, abs=5e-4)

    def test_empty_required_is_one(self):
        it = item(required=())
        assert completeness(ann(), it) == Fraction(1)

    def test_all_covered(self):
        it = item(required=("a", "b"))
        assert completeness(ann(covered=2), it) == Fraction(1)


class TestQuestionAccuracy:
    def test_table_arithmetic_51_of_57(self):
        reports = [
            MetricReport(Fraction(1), Fraction(1), Fraction(1)) for _ in range(51)
        ] + [MetricReport(Fraction(1, 2), Fraction(1), Fraction(1)) for _ in range(6)]
        fraction, counts = question_accuracy(reports)
        assert fraction == Fraction(51, 57)
        assert float(fraction) == pytest.approx(0.895, abs=5e-4)
        assert counts["true"] == 51
        assert counts["false"] == 6
        assert counts["true_pct"] == pytest.approx(89.5, abs=0.05)

    def test_exactly_point_eight_fails(self):
        report = MetricReport(Fraction(4, 5), Fraction(1), Fraction(1))
        assert not report.question_pass

    def test_all_pass(self):
        reports = [MetricReport(Fraction(1), Fraction(1), Fraction(1))] * 3
        fraction, _ = question_accuracy(reports)
        assert fraction == Fraction(1)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            question_accuracy([])

    @given(
        st.integers(0, 10), st.integers(1, 10), st.integers(0, 10), st.integers(1, 10),
        st.integers(0, 10), st.integers(1, 10),
    )
    def test_metrics_always_in_unit_interval(self, a, b, c, d, e, f):
        report = MetricReport(
            Fraction(min(a, b), b), Fraction(min(c, d), d), Fraction(min(e, f), f)
        )
        for value in (report.relevance, report.correctness, report.completeness):
            assert 0 <= value <= 1


class TestAggregateStats:
    def test_constant(self):
        stats = aggregate_stats([1.0, 1.0, 1.0])
        assert stats == {"avg": 1.0, "std": 0.0, "min": 1.0, "max": 1.0, "median": 1.0, "n": 3}

    def test_two_values(self):
        stats = aggregate_stats([0.0, 1.0])
        assert stats["avg"] == 0.5
        assert stats["std"] == 0.5  # population convention
        assert stats["median"] == 0.5

    def test_single_value(self):
        stats = aggregate_stats([0.7])
        assert stats["avg"] == 0.7
        assert stats["std"] == 0.0
        assert stats["median"] == 0.7
        assert stats["n"] == 1

    def test_accepts_fractions(self):
        stats = aggregate_stats([Fraction(1, 2), Fraction(1, 4)])
        assert stats["avg"] == pytest.approx(0.375)

    def test_empty_rejected(self):
        with pytest.raises(EmptyInput):
            aggregate_stats([])


class TestLatencyPercentile:
    def test_nearest_rank_ten_samples(self):
        assert latency_percentile(list(range(1, 11)), 90) == 9

    def test_single_sample(self):
        assert latency_percentile([42], 50) == 42
        assert latency_percentile([42], 99) == 42

    def test_constant_samples(self):
        assert latency_percentile([5, 5, 5], 50) == 5

    def test_bounds(self):
        with pytest.raises(ValueError):
            latency_percentile([1], 0)
        with pytest.raises(ValueError):
            latency_percentile([1], 100)
        with pytest.raises(EmptyInput):
            latency_percentile([], 50)


class TestCorpusGeneration:
    def test_default_counts(self):
        corpus = generate_corpus(7)
        by_label = {
            label: sum(1 for q in corpus if q.label == label)
            for label in (LABEL_PRESENTER, LABEL_INSIGHT, LABEL_OOD)
        }
        assert by_label == {LABEL_PRESENTER: 120, LABEL_INSIGHT: 59, LABEL_OOD: 123}

    def test_deterministic(self):
        assert generate_corpus(7) == generate_corpus(7)

    def test_minimal_counts(self):
        corpus = generate_corpus(1, {"presenter": 1, "insight": 1, "ood": 1})
        assert len(corpus) == 3

    def test_unique_texts_within_class(self):
        corpus = generate_corpus(7)
        for label in (LABEL_PRESENTER, LABEL_INSIGHT, LABEL_OOD):
            texts = [q.text.lower() for q in corpus if q.label == label]
            assert len(set(texts)) == len(texts)

    def test_round_trips_through_file(self, tmp_path):
        corpus = generate_corpus(3, {"presenter": 5, "insight": 4, "ood": 3})
        path = tmp_path / "corpus.jsonl"
        save_corpus(corpus, str(path))
        assert load_corpus(str(path)) == corpus


class TestSupersample:
    def test_grows_to_target_with_unique_questions(self):
        base = generate_corpus(7)
        in_domain = [q for q in base if q.label != LABEL_OOD]
        grown = supersample(TemplateParaphraseProvider(), in_domain, 300)
        for label in (LABEL_PRESENTER, LABEL_INSIGHT):
            texts = [q.text.lower() for q in grown if q.label == label]
            assert len(texts) == 300
            assert len(set(texts)) == 300

    def test_target_equal_to_input_is_noop(self):
        base = [CorpusQuestion("q one", LABEL_PRESENTER), CorpusQuestion("q two", LABEL_PRESENTER)]
        assert supersample(TemplateParaphraseProvider(), base, 2) == base

    def test_constant_provider_trips_variation_guard(self):
        class ConstantProvider:
            def complete(self, req: CompletionRequest, timeout_s=None):
                return "same thing every time"

        base = [CorpusQuestion("q one", LABEL_PRESENTER), CorpusQuestion("q two", LABEL_PRESENTER)]
        with pytest.raises(InsufficientVariation):
            supersample(ConstantProvider(), base, 10)

    def test_target_below_input_rejected(self):
        base = [CorpusQuestion("a", LABEL_PRESENTER), CorpusQuestion("b", LABEL_PRESENTER)]
        with pytest.raises(ValueError):
            supersample(TemplateParaphraseProvider(), base, 1)


class TestRunBenchmarkIsolation:
    def test_one_failing_item_does_not_sink_the_run(self, today):
        from datetime import timezone
        from seller_insights.core import (
            Branch,
            ChatResponse,
            ExecutionTrace,
            GateVerdict,
            SellerContext,
        )
        from seller_insights.evalharness import run_benchmark

        class StubEngine:
            def handle(self, query, ctx):
                if "boom" in query.text:
                    raise RuntimeError("synthetic failure")
                trace = ExecutionTrace(
                    gate_verdict=GateVerdict.IN_DOMAIN,
                    gate_score=0.1,
                    claims=(("sales", "$1.00", ""),),
                )
                return ChatResponse(
                    answer="sales were $1.00",
                    branch=Branch.PRESENTER,
                    trace=trace,
                    latency_ms=5,
                )

        items = [
            BenchmarkItem(
                id="ok", question="sales please", in_scope=True, keywords=("sales",),
                required_insights=("$1.00",), ground_truth=(("sales", "$1.00"),),
            ),
            BenchmarkItem(
                id="bad", question="boom please", in_scope=True, keywords=("boom",),
            ),
        ]
        ctx = SellerContext(seller_id="s", today=today)
        report = run_benchmark(StubEngine(), items, ctx)
        by_id = {r.item_id: r for r in report.results}
        assert by_id["bad"].error and "synthetic failure" in by_id["bad"].error
        assert by_id["ok"].report is not None and by_id["ok"].report.question_pass
        assert report.accuracy["true"] == 1  # only the healthy item is scored


class TestBenchmarkFiles:
    def test_round_trip(self, tmp_path):
        items = [
            BenchmarkItem(
                id="i1",
                question="sales?",
                in_scope=True,
                keywords=("sales",),
                required_insights=("$1.00",),
                ground_truth=(("P001 Sales", "$1.00"),),
            ),
            BenchmarkItem(id="i2", question="weather?", in_scope=False),
        ]
        path = tmp_path / "bench.jsonl"
        save_benchmark(items, str(path))
        assert load_benchmark(str(path)) == items

    def test_annotations_round_trip(self, tmp_path):
        path = tmp_path / "ann.jsonl"
        path.write_text(
            '{"item_id": "i1", "insights_in_response": 4, "correct_insights": 3, '
            '"required_covered": 2}\n'
        )
        loaded = load_annotations(str(path))
        assert loaded["i1"].correct_insights == 3

    def test_in_scope_item_requires_keywords(self):
        with pytest.raises(ValueError):
            BenchmarkItem(id="x", question="q", in_scope=True, keywords=())
