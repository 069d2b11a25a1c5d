import json

from ._ras import (
    RasError,
    assemble_history,
    encode_triples,
    golden_match,
    normalize_text,
    parse_plan,
    parse_triples,
    render_answer_prompt,
    render_plan_prompt,
    rouge_l,
    rouge_lsum,
    search,
    serialize_triples,
    token_f1,
)
from . import _ras


def evaluate(metric, predictions, references, workers=1):
    """Score predictions {id: text} against references {id: [texts]}."""
    preds = [(str(k), v) for k, v in predictions.items()]
    refs = [(str(k), [v] if isinstance(v, str) else list(v)) for k, v in references.items()]
    return json.loads(_ras._evaluate(metric, preds, refs, workers))


def run_question(question, script, corpus=(), triples=None, top_k=5,
                 max_iterations=5, retriever="bm25", embed_dim=64):
    """Run one scripted session and return its trace as a dict."""
    trace = _ras._run_question(question, list(script), list(corpus), dict(triples or {}),
                               top_k, max_iterations, retriever, embed_dim)
    return json.loads(trace)


__all__ = [
    "RasError", "assemble_history", "encode_triples", "evaluate", "golden_match",
    "normalize_text", "parse_plan", "parse_triples", "render_answer_prompt",
    "render_plan_prompt", "rouge_l", "rouge_lsum", "run_question", "search",
    "serialize_triples", "token_f1",
]
