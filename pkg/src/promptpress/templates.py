"""Versioned prompt templates, addressed by name from configuration.

Substitution is literal string replacement on named slots of the form
{slot}. The template-writer template deliberately uses {input_text} and
{input_question} for its own inputs because its body must carry the literal
placeholders {text} and {question} through to the model untouched.
"""

from __future__ import annotations

_QUERY_WRITER_V1 = """\
You are tasked with writing user queries based on a long context. Consider \
the topic of the context when formulating the query. Queries should be \
concise and specific. You may also ask more complex questions, such as \
requesting specific knowledge extraction from the text, extending the text, \
answering questions based on the text, paraphrasing/rewriting the text, or \
summarizing the text.
Do not include the word "context" in the query.
Long context: {text}
Query:"""

_TEMPLATE_WRITER_V1 = """\
You are tasked with writing a user query based on a long context. Create a \
complex template that integrates this context and a question into a single \
instruction.
The template must include the placeholders {text} and {question}.
Template examples:
1. You are given a text and a question related to it. Answer the question \
based on the text.
Question: {question}
Text: {text}
Now answer the question:
2. Can you extend the following block of code: {text}
such that it satisfies the requirement: {question}
Now write the code:
Provide various templates, taking into account the topic of the text and \
the question.

Long context: {input_text}
Question: {input_question}
Template:"""

_MULTIHOP_WRITER_V1 = """\
You are given a long text consisting of numbered sentences. Your task is to \
generate complex multi-hop questions about this text, such that answering \
them requires step-by-step reasoning (in multiple hops). To achieve this, \
first, ask a series of sequential factual questions and identify the \
corresponding sentences that contain the answers to these questions. Then, \
formulate a final question that can only be answered by combining the \
information from the previously generated questions and answers. \
Additionally, specify which sentences (by their numbers) contain the \
information necessary to answer the final question.

Toy example:
[[1]] John is married to Mary. [[2]] They've decided to spend their \
marriage anniversary in Spain. [[3]] Mary was afraid that their two small \
children, Jody and Sue, were too small for a flight. [[4]] That's why she \
asked her elder sister Jane to look after them.
Questions:
Question 1: Who is John married to?
Answer 1: John is married to Mary, as stated in [[1]].
Question 2: How many children does Mary have?
Answer 2: Mary has two children, as stated in [[3]].

Combining the questions to create a multi-hop question:
1. John is married to Mary, as stated in [[1]].
2. Mary has two children, as stated in [[3]].
Final question: How many children does John have?
Necessary sentences: [[1]], [[3]]

Now, solve this example:
{text}
Questions:"""

# slot name -> slots that get substituted; every other brace survives.
_TEMPLATES: dict[str, tuple[str, tuple[str, ...]]] = {
    "query_writer_v1": (_QUERY_WRITER_V1, ("text",)),
    "template_writer_v1": (_TEMPLATE_WRITER_V1, ("input_text", "input_question")),
    "multihop_writer_v1": (_MULTIHOP_WRITER_V1, ("text",)),
    "verbatim": ("{text}", ("text",)),
}


def template_names() -> list[str]:
    return sorted(_TEMPLATES)


def get_template(name: str) -> str:
    try:
        return _TEMPLATES[name][0]
    except KeyError:
        raise KeyError(f"unknown template {name!r}; known: {template_names()}") from None


def render(name: str, **values: str) -> str:
    """Fill the named template's slots; unknown or missing slots are errors."""
    text, slots = _TEMPLATES.get(name, (None, None))
    if text is None:
        raise KeyError(f"unknown template {name!r}; known: {template_names()}")
    extra = set(values) - set(slots)
    missing = set(slots) - set(values)
    if extra or missing:
        raise ValueError(f"template {name!r} takes slots {slots}, got {sorted(values)}")
    for slot in slots:
        text = text.replace("{" + slot + "}", values[slot])
    return text
