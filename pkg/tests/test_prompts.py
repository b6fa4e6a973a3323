import hashlib
import re

import pytest

from evicheck.prompts import TEMPLATES, BindingError, placeholders, render

# Frozen digests of the template bodies; any wording drift fails here.
TEMPLATE_SHA256 = {
    "Answer": "eb727f78321ed3c2aa364d14cc056e6e8eba81c8d8aae0572c2e5944f558054f",
    "DirectCheck": "930e4a49b4df10187234b77d6ea050fa74b91694f1059475bbb0d8e5d71b0f24",
    "SupportCheck": "7bceb88b1319ec67dfd8deabf5215f26b94e6fee0c2f5a247ae9c679955af577",
    "Reader": "63d8aa9a7198873ac306e23ea9b42c87931979f87db90be021496e50fa5fedde",
    "FactExtract": "e82e27b160acc23370cc94ddabb90879b18857b18b160a536dd8f1aaec94d330",
    "FactValidate": "ded8b9f8a498abc2e5d33ddee3482862e5bd7506761bd7fde2fd838f46fae2fd",
    "FactPostEdit": "96bd8b65d582389d70fa28877d895b72b07a6c048c545288a96035b8795a4708",
}

EXPECTED_PLACEHOLDERS = {
    "Answer": ["query"],
    "DirectCheck": ["query", "answer"],
    "SupportCheck": ["query", "LLM answer", "Retrieved answer"],
    "Reader": ["query", "passage1", "passage2", "passage3"],
    "FactExtract": ["question", "proposed answer"],
    "FactValidate": ["statement", "passage"],
    "FactPostEdit": ["statement", "passage"],
}


def test_all_templates_present_and_checksummed():
    assert set(TEMPLATES) == set(TEMPLATE_SHA256)
    for name, body in TEMPLATES.items():
        digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
        assert digest == TEMPLATE_SHA256[name], name


def test_each_placeholder_appears_exactly_once():
    for name, body in TEMPLATES.items():
        found = placeholders(body)
        assert found == EXPECTED_PLACEHOLDERS[name], name
        assert len(found) == len(set(found)), name


def test_render_inlines_question():
    rendered = render("Answer", {"query": "what is bm25"})
    assert "Question: what is bm25" in rendered
    assert rendered.endswith("Answer:")
    assert "{query}" not in rendered


def test_reader_requires_three_passages():
    bindings = {"query": "q", "passage1": "a", "passage2": "b", "passage3": "c"}
    rendered = render("Reader", bindings)
    for text in ("Passage 1: a", "Passage 2: b", "Passage 3: c"):
        assert text in rendered
    with pytest.raises(BindingError, match="passage3"):
        render("Reader", {"query": "q", "passage1": "a", "passage2": "b"})


def test_single_pass_substitution_no_reexpansion():
    rendered = render("Answer", {"query": "literal {query} stays"})
    assert rendered.count("literal {query} stays") == 1
    # The braces inside the value survive unexpanded.
    assert "{query}" in rendered


def test_missing_and_extra_bindings_are_named():
    with pytest.raises(BindingError) as err:
        render("DirectCheck", {"query": "q", "bogus": "x"})
    assert "answer" in str(err.value)
    assert "bogus" in str(err.value)


def test_support_template_binds_spaced_names():
    rendered = render("SupportCheck", {
        "query": "Q", "LLM answer": "A", "Retrieved answer": "E",
    })
    assert "Answer: A" in rendered
    assert "Evidence: E" in rendered


def test_wording_spot_checks():
    assert "You are an expert in this field." in TEMPLATES["Answer"]
    assert "act as an assessor of the answer" in TEMPLATES["DirectCheck"]
    assert "ad 'No'" in TEMPLATES["DirectCheck"]  # source quirk preserved
    assert "reply with only the word 'Supported'" in TEMPLATES["FactValidate"]
    assert "simply reply with 'No Answer'" in TEMPLATES["Reader"]
    assert "Please only reply with the bullet list and nothing else." in TEMPLATES["FactExtract"]
    assert "make minimal changes to the original statement" in TEMPLATES["FactPostEdit"]


def test_templates_have_no_stray_braces():
    for name, body in TEMPLATES.items():
        stripped = re.sub(r"\{[^{}]+\}", "", body)
        assert "{" not in stripped and "}" not in stripped, name
