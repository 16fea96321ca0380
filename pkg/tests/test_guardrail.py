import pytest
from hypothesis import given
from hypothesis import strategies as st

from seller_insights.guardrail import (
    REASON_EMAIL,
    REASON_NATIONAL_ID,
    REASON_PHONE,
    REASON_TOXIC,
    Guardrail,
    guardrail_screen,
    load_guardrail,
)

safe_text = st.text(
    alphabet=st.characters(whitelist_categories=("Ll", "Lu", "Zs")), max_size=120
)


class TestScreen:
    def test_email_blocked(self):
        verdict = guardrail_screen("contact me at a@b.com")
        assert verdict.blocked
        assert verdict.reason == REASON_EMAIL

    def test_phone_blocked(self):
        verdict = guardrail_screen("call +1 555-123-4567 today")
        assert verdict.blocked
        assert verdict.reason == REASON_PHONE

    def test_national_id_blocked(self):
        verdict = guardrail_screen("ssn 123-45-6789")
        assert verdict.blocked
        assert verdict.reason == REASON_NATIONAL_ID

    def test_denylist_blocked(self):
        verdict = guardrail_screen("that buyer is an idiot")
        assert verdict.blocked
        assert verdict.reason == REASON_TOXIC

    def test_plain_business_answer_passes(self):
        assert not guardrail_screen("Your sales were $10K").blocked

    def test_dates_and_currency_do_not_false_positive(self):
        text = (
            "Your top products for August 2024 (2024-08-01 ~ 2024-08-31): "
            "P001: $30,000.00, P002: $1,234.56, conversion 0.50%"
        )
        assert not guardrail_screen(text).blocked

    def test_first_match_wins(self):
        verdict = guardrail_screen("email a@b.com about that idiot")
        assert verdict.reason == REASON_EMAIL

    @given(safe_text)
    def test_pure_and_idempotent_on_pass_text(self, text):
        guard = Guardrail()
        first = guard.screen(text)
        second = guard.screen(text)
        assert first == second


class TestRulesFile:
    def test_load_custom_denylist(self, tmp_path):
        rules = tmp_path / "rules.txt"
        rules.write_text("# comment\ntoxic: gullible\ntoxic: sucker\n")
        guard = load_guardrail(str(rules))
        assert guard.screen("what a gullible person").reason == REASON_TOXIC
        assert not guard.screen("that buyer is an idiot").blocked  # defaults replaced

    def test_load_custom_pattern(self, tmp_path):
        rules = tmp_path / "rules.txt"
        rules.write_text("pii_email: NOPE[0-9]+\ntoxic: zzz\n")
        guard = load_guardrail(str(rules))
        assert guard.screen("NOPE42").reason == REASON_EMAIL
        assert not guard.screen("a@b.com").blocked

    def test_bad_rule_kind_rejected(self, tmp_path):
        rules = tmp_path / "rules.txt"
        rules.write_text("sketchy: thing\n")
        with pytest.raises(ValueError):
            load_guardrail(str(rules))

    def test_packaged_default_rules_load(self):
        from importlib import resources

        with resources.as_file(
            resources.files("seller_insights.configs").joinpath("guardrail_rules.txt")
        ) as p:
            guard = load_guardrail(str(p))
        assert guard.screen("you moron").reason == REASON_TOXIC
