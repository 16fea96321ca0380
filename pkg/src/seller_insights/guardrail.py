"""Outbound response screen: PII patterns and a toxicity denylist.

Rule-based by design. Rules are applied in a fixed order (email, phone,
national id, denylist terms) and the first match blocks the response.
Screening is pure; the same text always yields the same verdict.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .core import GUARDRAIL_PASS, GuardrailVerdict

REASON_EMAIL = "PII_EMAIL"
REASON_PHONE = "PII_PHONE"
REASON_NATIONAL_ID = "PII_NATIONAL_ID"
REASON_TOXIC = "TOXIC_TERM"

EMAIL_PATTERN = r"[A-Za-z0-9._%+-]+@[A-Za-z0-9.-]+\.[A-Za-z]{2,}"
# 3-3-4 digit groups with separators, optional country code. Dates (4-2-2)
# and currency ("$1,234.56") must not match.
PHONE_PATTERN = r"(?:\+?\d{1,3}[-.\s])?\(?\d{3}\)?[-.\s]\d{3}[-.\s]\d{4}\b"
NATIONAL_ID_PATTERN = r"\b\d{3}-\d{2}-\d{4}\b"

DEFAULT_DENYLIST = ("idiot", "moron", "scumbag")


@dataclass(frozen=True)
class Guardrail:
    email_re: re.Pattern = field(default_factory=lambda: re.compile(EMAIL_PATTERN))
    phone_re: re.Pattern = field(default_factory=lambda: re.compile(PHONE_PATTERN))
    national_id_re: re.Pattern = field(
        default_factory=lambda: re.compile(NATIONAL_ID_PATTERN)
    )
    denylist: tuple = DEFAULT_DENYLIST

    def screen(self, text: str) -> GuardrailVerdict:
        if self.email_re.search(text):
            return GuardrailVerdict(status="blocked", reason=REASON_EMAIL)
        if self.phone_re.search(text):
            return GuardrailVerdict(status="blocked", reason=REASON_PHONE)
        if self.national_id_re.search(text):
            return GuardrailVerdict(status="blocked", reason=REASON_NATIONAL_ID)
        lowered = text.lower()
        for term in self.denylist:
            if term in lowered:
                return GuardrailVerdict(status="blocked", reason=REASON_TOXIC)
        return GUARDRAIL_PASS


def guardrail_screen(text: str, guardrail: Guardrail | None = None) -> GuardrailVerdict:
    return (guardrail or Guardrail()).screen(text)


def load_guardrail(path: str) -> Guardrail:
    """Load rules from a plain-text file, one `kind: value` rule per line.

    Kinds: pii_email, pii_phone, pii_national_id (regex values) and toxic
    (literal denylist term). Blank lines and `#` comments are skipped;
    omitted kinds fall back to the built-in defaults.
    """
    email, phone, national_id = EMAIL_PATTERN, PHONE_PATTERN, NATIONAL_ID_PATTERN
    terms: list[str] = []
    with open(path, encoding="utf-8") as f:
        for raw in f:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            kind, _, value = line.partition(":")
            kind, value = kind.strip().lower(), value.strip()
            if not value:
                raise ValueError(f"guardrail rule without a value: {line!r}")
            if kind == "pii_email":
                email = value
            elif kind == "pii_phone":
                phone = value
            elif kind == "pii_national_id":
                national_id = value
            elif kind == "toxic":
                terms.append(value.lower())
            else:
                raise ValueError(f"unknown guardrail rule kind: {kind!r}")
    return Guardrail(
        email_re=re.compile(email),
        phone_re=re.compile(phone),
        national_id_re=re.compile(national_id),
        denylist=tuple(terms) if terms else DEFAULT_DENYLIST,
    )
