"""Prompt templates for every pipeline stage.

Templates are registered under stable ids so providers can render them
from a :class:`~metarag.gateway.CompletionRequest` alone. Callers may
register replacements (e.g. a tuned summary prompt) under the same id.
"""

from __future__ import annotations

from metarag.gateway import PromptTemplate

ENRICHMENT_TEMPLATE_ID = "enrichment"
AUGMENTATION_TEMPLATE_ID = "augmentation"
MK_SUMMARY_TEMPLATE_ID = "mk_summary"
FINAL_ANSWER_TEMPLATE_ID = "final_answer"
JUDGE_TEMPLATE_ID = "judge"
EVAL_QUERY_TEMPLATE_ID = "eval_query"

_ENRICHMENT_TEXT = """\
You are an helpful research assistant, preprocessing {document_types} for {users_types} to use later on.
You are provided with a document and a list of questions that aims at extracting key knowledge from this document. Please stricly follow the format below to answer (no introduction or finishing sentences).

First, answer the following questions with a single Yes or No only:
1. The paper can be clearly categorized into one or multiple research field(s) (exclusively from: {text_categories}), yes or no?:
2. The paper is mostly an applied research paper (versus mostly theoric), yes or no?:
3. The paper is referencing a Github repository, yes or no?
4. The paper contains mathematical reasoning, yes or no?:
5. The paper mentions a specific application to an industry company, yes or no?:
6. The paper uses evaluations metrics to benchmark their methods, yes or no?:
Answer the following questions with a python list only, or return an empty python list:
1. If the paper can be clearly categorized into one or multiple research fields, list the fields (3 max):
2. If the paper is mostly an applied research paper, list the application fields (3 max):
3. If the paper references one or more Github repository, list their urls (2 max):
4. If the paper contains mathematical reasoning, list the name(s) of the theorem(s) being used (3 max):
5. If the paper mentioned a specific application to an industry company, list the companies (3 max):
6. If the paper use evaluations metrics to benchmark their methods, list the names of the metrics (5 max):

Your answer must look like the following (no introduction sentence):
1. Yes
2. No
etc.

1. ['a','b']
2. []
etc.

Then, please act as an expert scientists and formulate both general (general understanding) and precise questions (incl. specific findings or limitations) from the content of the document to assess the knowledge of other highly knowledgeable scientists about the topic of this document.

Scientists that will answer the questions do not know the document. Please do not explicitly refer to "the text" or the name of the document in the questions.
Each questions and answers pairs must be self-contained (make sure to give enough context) and independent from other pairs.

Please formulate as many questions as possible covering as much content as possible, and avoid bullet points within answers.

Stricly follow the format of the final questions and answers below, presenting all responses, lists, questions, then all answers:

Questions:
1. ...
2. ...
etc.

Answers:
1. ...
2. ...
etc.

Please find below the text, for which the title is {doc_title}:

[Text]
{doc_content}
[/Text]
"""

_AUGMENTATION_TEXT = """\
You are an assistant for scientists. You will be provided with a user question.
Your goal is to generate questions for scientists to asks the literature and prepare themselves to answer it.
To generate the questions, you can rely on the summary of the database at hand, provided below as [DatabaseSummary]
Please generate as much relevant questions as possible (maximum 5) for a strategic answer.
Remember, scientists will use these questions to search the literature.

It is better to generate more simple questions than fewer complex questions.

[DatabaseSummary]
{mk_summary}
[/DatabaseSummary]

[HumanQuery]
{user_query}
[/HumanQuery]

Please only reply with numbered questions, stricly follow this format. There is no need for introduction context or conclusion text before or after questions.

Example:

1. ...
2. ...
3. ...
...
N. ...
"""

_MK_SUMMARY_TEXT = """\
You are cataloguing a research question database for scientists.
Below is a numbered list of questions, all tagged with: {field_values}.

Summarize, in at most 300 words, the key concepts, topics, and question styles present in this list.
Write a single paragraph telling a scientist what kind of knowledge the database holds about {field_values}.
Do not answer the questions themselves.

[Questions]
{questions}
[/Questions]
"""

_FINAL_ANSWER_TEXT = """\
You are a research assistant for scientists. Answer the user question below using the retrieved context.
The context is a JSON array of entries with fields "title", "question", and "answer", retrieved from a research database.
Ground your answer in the context entries. If the context is empty or insufficient, state that the database offers limited coverage of the question instead of speculating.

[OriginalQuestion]
{user_query}
[/OriginalQuestion]

[SearchQuestions]
{sub_queries}
[/SearchQuestions]

[Context]
{context_json}
[/Context]
{few_shot}
Please provide a comprehensive, well-structured answer to the original question.
"""

_JUDGE_TEXT = """\
You are a trusted, impartial evaluator of literature search systems.
You will be shown a research question and, for each of the anonymous scientists listed here ({labels}), the context their system retrieved and the final answer they produced.

Rate every scientist on each of the following metrics on a scale from 0 to 100:

- **Recall**: evaluates the coverage of key, highly relevant information contained in the retrieved documents
- **Precision**: evaluates the ratio of relevant documents against irrelevant ones
- **Specificity**: evaluates how precisely focused the final answer is on the query at hand, with clear and direct information that addresses the question
- **Breadth**: evaluates the coverage of all relevant aspects or areas related to the question, providing a complete overview
- **Depth**: evaluates the extent to which the final answer provides a thorough understanding through detailed analysis and insights into the subject
- **Relevancy**: evaluates how well-tailored the final answer is to the needs and interests of the audience or context, focusing on providing directly applicable and essential information while omitting extraneous details that do not contribute to addressing the specific question

Reply with one block per scientist, strictly in this format:

**ScientistN Response**

**Recall:** <integer>/100 - <justification>
**Precision:** <integer>/100 - <justification>
**Specificity:** <integer>/100 - <justification>
**Breadth:** <integer>/100 - <justification>
**Depth:** <integer>/100 - <justification>
**Relevancy:** <integer>/100 - <justification>

Scores must be integers between 0 and 100.

[Question]
{query}
[/Question]

{sections}
"""

_EVAL_QUERY_TEXT = """\
You are preparing a benchmark of research questions for a literature search engine.
Write one concise research question that a scientist interested in {field_values} might ask.
The question must stand alone, name its topic explicitly, and be answerable from research literature.

Examples of the expected style:
1. How can graph neural networks improve protein structure prediction?
2. What statistical techniques detect fraud in online payment streams?

Reply with the question only, on a single line, with no numbering or preamble.
"""

_REGISTRY: dict[str, PromptTemplate] = {}


def register_template(template: PromptTemplate) -> None:
    _REGISTRY[template.template_id] = template


def get_template(template_id: str) -> PromptTemplate:
    if template_id not in _REGISTRY:
        raise KeyError(f"no template registered under {template_id!r}")
    return _REGISTRY[template_id]


for _tid, _text in [
    (ENRICHMENT_TEMPLATE_ID, _ENRICHMENT_TEXT),
    (AUGMENTATION_TEMPLATE_ID, _AUGMENTATION_TEXT),
    (MK_SUMMARY_TEMPLATE_ID, _MK_SUMMARY_TEXT),
    (FINAL_ANSWER_TEMPLATE_ID, _FINAL_ANSWER_TEXT),
    (JUDGE_TEMPLATE_ID, _JUDGE_TEXT),
    (EVAL_QUERY_TEMPLATE_ID, _EVAL_QUERY_TEXT),
]:
    register_template(PromptTemplate(_tid, _text))
